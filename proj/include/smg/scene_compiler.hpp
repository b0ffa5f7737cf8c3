#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smg/errors.hpp"
#include "smg/geometry.hpp"
#include "smg/llm_client.hpp"
#include "smg/llm_prompts.hpp"

// Scene compiler: turns a labeled 3D scene plus a target query into the
// spatial auxiliary (road map + target height map + target box) consumed by
// the motion planner.

namespace smg {

inline constexpr double kDefaultCellSize = 0.25;
// Objects outside this height band above the ground are irrelevant for
// walking (floors, ceiling fixtures) and cast no road-map obstacles.
inline constexpr double kWalkHeight = 2.0;
inline constexpr double kGroundClearance = 0.1;
inline constexpr double kHeightMapNoData = -1.0;

struct SceneObject {
    int id = 0;
    std::string label;
    OrientedBox box;
    std::vector<Vec3> points;  // optional point set
};

struct Scene {
    std::vector<SceneObject> objects;
    Aabb world_aabb;
    double ground_z = 0.0;

    const SceneObject* find(int id) const {
        for (const auto& o : objects) {
            if (o.id == id) return &o;
        }
        return nullptr;
    }

    void validate() const {
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const auto& o = objects[i];
            if (o.label.empty()) throw Error("scene: object label must be non-empty");
            if (!(o.box.half_extents.array() > 0.0).all()) {
                throw Error("scene: half extents must be positive");
            }
            for (std::size_t k = i + 1; k < objects.size(); ++k) {
                if (objects[k].id == o.id) throw Error("scene: duplicate object id");
            }
            for (const auto& p : o.points) {
                if (!world_aabb.contains(p)) throw Error("scene: point outside world bounds");
            }
            for (const auto& corner : o.box.footprint()) {
                if (corner.x() < world_aabb.min.x() - 1e-9 || corner.x() > world_aabb.max.x() + 1e-9 ||
                    corner.y() < world_aabb.min.y() - 1e-9 || corner.y() > world_aabb.max.y() + 1e-9) {
                    throw Error("scene: box footprint outside world bounds");
                }
            }
            if (o.box.bottom() < world_aabb.min.z() - 1e-9 || o.box.top() > world_aabb.max.z() + 1e-9) {
                throw Error("scene: box outside vertical world bounds");
            }
        }
    }
};

// Collision field for the sampler and metrics: every object box, target
// included (resting on the target is contact, not collision, because
// capsule samples stop at the surface).
inline SceneField scene_field(const Scene& scene) {
    SceneField f;
    f.bounds = scene.world_aabb;
    f.boxes.reserve(scene.objects.size());
    for (const auto& o : scene.objects) f.boxes.push_back(o.box);
    return f;
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

enum class CellState : std::uint8_t { Free = 0, Obstacle = 1, Target = 2 };

struct RoadMap {
    double origin_x = 0.0, origin_y = 0.0;
    double cell = kDefaultCellSize;
    int width = 0, height = 0;
    std::vector<CellState> cells;  // row-major, index j*width + i

    CellState at(int i, int j) const { return cells[static_cast<std::size_t>(j) * width + i]; }
    CellState& at(int i, int j) { return cells[static_cast<std::size_t>(j) * width + i]; }
    bool in_bounds(int i, int j) const { return i >= 0 && i < width && j >= 0 && j < height; }
    Eigen::Vector2d cell_center(int i, int j) const {
        return {origin_x + (i + 0.5) * cell, origin_y + (j + 0.5) * cell};
    }
    std::pair<int, int> cell_of(double x, double y) const {
        return {static_cast<int>(std::floor((x - origin_x) / cell)),
                static_cast<int>(std::floor((y - origin_y) / cell))};
    }
};

struct HeightMap {
    double origin_x = 0.0, origin_y = 0.0;
    double cell = kDefaultCellSize;
    int width = 0, height = 0;
    std::vector<double> values;  // row-major; kHeightMapNoData where empty

    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
};

struct SpatialAuxiliary {
    RoadMap road_map;
    HeightMap height_map;
    int target_id = 0;
    OrientedBox target_box;
};

namespace detail {

// Positive-area overlap test between an axis-aligned cell rectangle and a
// rotated box footprint (separating axes; touching edges do not count).
inline bool footprint_intersects_cell(const std::array<Eigen::Vector2d, 4>& corners, double yaw,
                                      double x0, double y0, double x1, double y1) {
    constexpr double kEps = 1e-9;
    const Eigen::Vector2d axes[4] = {{1.0, 0.0},
                                     {0.0, 1.0},
                                     {std::cos(yaw), std::sin(yaw)},
                                     {-std::sin(yaw), std::cos(yaw)}};
    const Eigen::Vector2d cell_pts[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    for (const auto& axis : axes) {
        double lo_a = 1e300, hi_a = -1e300, lo_b = 1e300, hi_b = -1e300;
        for (const auto& c : corners) {
            const double v = axis.dot(c);
            lo_a = std::min(lo_a, v);
            hi_a = std::max(hi_a, v);
        }
        for (const auto& c : cell_pts) {
            const double v = axis.dot(c);
            lo_b = std::min(lo_b, v);
            hi_b = std::max(hi_b, v);
        }
        if (std::min(hi_a, hi_b) - std::max(lo_a, lo_b) <= kEps) return false;
    }
    return true;
}

// Marks every grid cell overlapping the box footprint, visiting only the
// cells under the footprint's bounding rectangle.
template <typename Grid, typename Fn>
inline void for_each_footprint_cell(Grid& grid, const OrientedBox& box, Fn&& fn) {
    const auto corners = box.footprint();
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (const auto& c : corners) {
        minx = std::min(minx, c.x());
        maxx = std::max(maxx, c.x());
        miny = std::min(miny, c.y());
        maxy = std::max(maxy, c.y());
    }
    const int i0 = std::max(0, static_cast<int>(std::floor((minx - grid.origin_x) / grid.cell)));
    const int j0 = std::max(0, static_cast<int>(std::floor((miny - grid.origin_y) / grid.cell)));
    const int i1 = std::min(grid.width - 1, static_cast<int>(std::floor((maxx - grid.origin_x) / grid.cell)));
    const int j1 = std::min(grid.height - 1, static_cast<int>(std::floor((maxy - grid.origin_y) / grid.cell)));
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            const double x0 = grid.origin_x + i * grid.cell;
            const double y0 = grid.origin_y + j * grid.cell;
            if (footprint_intersects_cell(corners, box.yaw, x0, y0, x0 + grid.cell, y0 + grid.cell)) {
                fn(i, j);
            }
        }
    }
}

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (const char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline bool contains_token(const std::vector<std::string>& tokens, const std::string& t) {
    return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
}

// Fraction of the label's tokens present in the query tokens; 0 = no match.
inline double label_score(const std::string& label, const std::vector<std::string>& tokens) {
    const auto label_tokens = tokenize(label);
    if (label_tokens.empty()) return 0.0;
    int hits = 0;
    for (const auto& lt : label_tokens) hits += contains_token(tokens, lt);
    return static_cast<double>(hits) / static_cast<double>(label_tokens.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Target locating
// ---------------------------------------------------------------------------

// Rule-based target locator: match normalized label tokens against the
// query; "near X" / "away from X" splits the query into a target part and a
// reference part, and ties among equally scored candidates are resolved by
// XY distance to the reference (then by lowest id).
inline int locate_target_rule(const Scene& scene, const std::string& query) {
    if (scene.objects.empty()) throw NoMatch("scene has no objects");
    const auto tokens = detail::tokenize(query);

    // Split at the first relation keyword, if any.
    enum class Relation { None, Near, Away } relation = Relation::None;
    std::vector<std::string> pre = tokens, post;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool near = tokens[i] == "near";
        const bool away = i + 1 < tokens.size() && tokens[i] == "away" && tokens[i + 1] == "from";
        if (!near && !away) continue;
        relation = near ? Relation::Near : Relation::Away;
        pre.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
        post.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i + (near ? 1 : 2)), tokens.end());
        break;
    }

    auto best_candidates = [&](const std::vector<std::string>& in) {
        double best = 0.0;
        std::vector<const SceneObject*> out;
        for (const auto& o : scene.objects) {
            const double s = detail::label_score(o.label, in);
            if (s <= 0.0) continue;
            if (s > best + 1e-12) {
                best = s;
                out.clear();
            }
            if (s >= best - 1e-12) out.push_back(&o);
        }
        return out;
    };

    auto candidates = best_candidates(relation == Relation::None ? tokens : pre);
    if (candidates.empty() && relation != Relation::None) candidates = best_candidates(tokens);
    if (candidates.empty()) throw NoMatch("no object label matches query: " + query);

    if (candidates.size() > 1 && relation != Relation::None) {
        const auto refs = best_candidates(post);
        const SceneObject* ref = nullptr;
        for (const auto* r : refs) {
            if (std::find(candidates.begin(), candidates.end(), r) == candidates.end()) {
                ref = r;
                break;
            }
        }
        if (ref != nullptr) {
            auto dist = [&](const SceneObject* o) {
                return (o->box.center.head<2>() - ref->box.center.head<2>()).norm();
            };
            std::stable_sort(candidates.begin(), candidates.end(),
                             [&](const SceneObject* a, const SceneObject* b) {
                                 const double da = dist(a), db = dist(b);
                                 if (da != db) return relation == Relation::Near ? da < db : da > db;
                                 return a->id < b->id;
                             });
            return candidates.front()->id;
        }
    }
    return (*std::min_element(candidates.begin(), candidates.end(),
                              [](const SceneObject* a, const SceneObject* b) { return a->id < b->id; }))
        ->id;
}

// LLM-backed locator: serialize the boxes, ask for {"target_id": id}.
// Transport failures propagate as LlmFailure; malformed or unknown ids are
// ParseFailure.
inline int locate_target_llm(const Scene& scene, const std::string& query, LlmClient& client,
                             const std::string& model = "gpt-4") {
    if (scene.objects.empty()) throw NoMatch("scene has no objects");
    std::ostringstream user;
    user << "Objects:\n";
    for (const auto& o : scene.objects) {
        const auto& b = o.box;
        user << "  id=" << o.id << " label=\"" << o.label << "\" center=(" << b.center.x() << ", "
             << b.center.y() << ", " << b.center.z() << ") half_extents=(" << b.half_extents.x()
             << ", " << b.half_extents.y() << ", " << b.half_extents.z() << ") yaw=" << b.yaw
             << "\n";
    }
    user << "Instruction: " << query << "\n";
    ChatRequest req{model, {{"system", prompts::kLocatorSystem}, {"user", user.str()}}, 0.0, 256};
    const std::string reply = client.complete(req);
    nlohmann::json parsed;
    try {
        parsed = extract_json_block(reply);
    } catch (const ParseFailure&) {
        throw ParseFailure("locator reply contained no JSON: " + reply);
    }
    if (!parsed.contains("target_id") || !parsed["target_id"].is_number_integer()) {
        throw ParseFailure("locator reply missing integer target_id");
    }
    const int id = parsed["target_id"].get<int>();
    if (scene.find(id) == nullptr) throw ParseFailure("locator returned unknown object id");
    return id;
}

struct TargetLocator {
    LlmClient* client = nullptr;  // null -> rule-based
    std::string model = "gpt-4";
};

inline int locate_target(const Scene& scene, const std::string& query, const TargetLocator& locator) {
    return locator.client != nullptr ? locate_target_llm(scene, query, *locator.client, locator.model)
                                     : locate_target_rule(scene, query);
}

// ---------------------------------------------------------------------------
// Road map and height map
// ---------------------------------------------------------------------------

// Projects obstacle footprints within the walk-height band onto a grid over
// the world bounds; target footprint cells are marked last and win.
inline RoadMap build_road_map(const Scene& scene, int target_id, double cell) {
    if (!(cell > 0.0)) throw InvalidCellSize("road map cell size must be positive");
    const SceneObject* target = scene.find(target_id);
    if (target == nullptr) throw Error("road map: unknown target id");

    RoadMap rm;
    rm.cell = cell;
    rm.origin_x = scene.world_aabb.min.x();
    rm.origin_y = scene.world_aabb.min.y();
    rm.width = std::max(1, static_cast<int>(std::ceil((scene.world_aabb.max.x() - rm.origin_x) / cell)));
    rm.height = std::max(1, static_cast<int>(std::ceil((scene.world_aabb.max.y() - rm.origin_y) / cell)));
    rm.cells.assign(static_cast<std::size_t>(rm.width) * rm.height, CellState::Free);

    for (const auto& o : scene.objects) {
        if (o.id == target_id) continue;
        const double bottom = o.box.bottom() - scene.ground_z;
        const double top = o.box.top() - scene.ground_z;
        if (bottom >= kWalkHeight || top <= kGroundClearance) continue;
        detail::for_each_footprint_cell(rm, o.box,
                                        [&](int i, int j) { rm.at(i, j) = CellState::Obstacle; });
    }
    detail::for_each_footprint_cell(rm, target->box,
                                    [&](int i, int j) { rm.at(i, j) = CellState::Target; });
    return rm;
}

// Per-cell maximum height of the target's points above the ground over the
// target footprint; cells are half-open [lo, hi). Without a point set the
// box top fills every footprint cell.
inline HeightMap build_height_map(const Scene& scene, int target_id, double cell) {
    if (!(cell > 0.0)) throw InvalidCellSize("height map cell size must be positive");
    const SceneObject* target = scene.find(target_id);
    if (target == nullptr) throw Error("height map: unknown target id");

    const auto corners = target->box.footprint();
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (const auto& c : corners) {
        minx = std::min(minx, c.x());
        maxx = std::max(maxx, c.x());
        miny = std::min(miny, c.y());
        maxy = std::max(maxy, c.y());
    }
    HeightMap hm;
    hm.cell = cell;
    hm.origin_x = minx;
    hm.origin_y = miny;
    hm.width = std::max(1, static_cast<int>(std::ceil((maxx - minx) / cell)));
    hm.height = std::max(1, static_cast<int>(std::ceil((maxy - miny) / cell)));
    hm.values.assign(static_cast<std::size_t>(hm.width) * hm.height, kHeightMapNoData);

    if (!target->points.empty()) {
        for (const auto& p : target->points) {
            const int i = static_cast<int>(std::floor((p.x() - hm.origin_x) / cell));
            const int j = static_cast<int>(std::floor((p.y() - hm.origin_y) / cell));
            if (i < 0 || i >= hm.width || j < 0 || j >= hm.height) continue;
            const double h = std::max(0.0, p.z() - scene.ground_z);
            hm.at(i, j) = std::max(hm.at(i, j), h);
        }
    } else {
        const double h = std::max(0.0, target->box.top() - scene.ground_z);
        detail::for_each_footprint_cell(hm, target->box, [&](int i, int j) { hm.at(i, j) = h; });
    }
    return hm;
}

// Full compile: locate, project, measure. Pure and byte-stable for the
// rule-based locator.
inline SpatialAuxiliary compile(const Scene& scene, const std::string& query,
                                const TargetLocator& locator, double cell = kDefaultCellSize) {
    SpatialAuxiliary aux;
    aux.target_id = locate_target(scene, query, locator);
    aux.target_box = scene.find(aux.target_id)->box;
    aux.road_map = build_road_map(scene, aux.target_id, cell);
    aux.height_map = build_height_map(scene, aux.target_id, cell);
    return aux;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// ASCII road map, row-major with north (+Y) on the first line: '.' free,
// '#' obstacle, 'T' target. This exact form goes into planner prompts.
inline std::string roadmap_ascii(const RoadMap& rm) {
    std::string out;
    out.reserve(static_cast<std::size_t>(rm.height) * (rm.width + 1));
    for (int j = rm.height - 1; j >= 0; --j) {
        for (int i = 0; i < rm.width; ++i) {
            switch (rm.at(i, j)) {
                case CellState::Free: out.push_back('.'); break;
                case CellState::Obstacle: out.push_back('#'); break;
                case CellState::Target: out.push_back('T'); break;
            }
        }
        out.push_back('\n');
    }
    return out;
}

inline nlohmann::json box_to_json(const OrientedBox& b) {
    return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
            {"half_extents", {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()}},
            {"yaw", b.yaw}};
}

inline OrientedBox box_from_json(const nlohmann::json& doc) {
    OrientedBox b;
    const auto& c = doc.at("center");
    const auto& h = doc.at("half_extents");
    b.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    b.half_extents = Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
    b.yaw = doc.value("yaw", 0.0);
    return b;
}

inline nlohmann::json aux_to_json(const SpatialAuxiliary& aux) {
    const RoadMap& rm = aux.road_map;
    nlohmann::json rows = nlohmann::json::array();
    for (int j = 0; j < rm.height; ++j) {
        std::string row;
        for (int i = 0; i < rm.width; ++i) {
            row.push_back(rm.at(i, j) == CellState::Free       ? '.'
                          : rm.at(i, j) == CellState::Obstacle ? '#'
                                                               : 'T');
        }
        rows.push_back(row);
    }
    const HeightMap& hm = aux.height_map;
    return {{"target_id", aux.target_id},
            {"target_box", box_to_json(aux.target_box)},
            {"road_map",
             {{"origin", {rm.origin_x, rm.origin_y}},
              {"cell", rm.cell},
              {"width", rm.width},
              {"height", rm.height},
              {"rows", rows}}},
            {"height_map",
             {{"origin", {hm.origin_x, hm.origin_y}},
              {"cell", hm.cell},
              {"width", hm.width},
              {"height", hm.height},
              {"nodata", kHeightMapNoData},
              {"values", hm.values}}}};
}

inline SpatialAuxiliary aux_from_json(const nlohmann::json& doc) {
    SpatialAuxiliary aux;
    aux.target_id = doc.at("target_id").get<int>();
    aux.target_box = box_from_json(doc.at("target_box"));
    const auto& rm = doc.at("road_map");
    aux.road_map.origin_x = rm.at("origin").at(0).get<double>();
    aux.road_map.origin_y = rm.at("origin").at(1).get<double>();
    aux.road_map.cell = rm.at("cell").get<double>();
    aux.road_map.width = rm.at("width").get<int>();
    aux.road_map.height = rm.at("height").get<int>();
    for (const auto& row : rm.at("rows")) {
        for (const char c : row.get<std::string>()) {
            aux.road_map.cells.push_back(c == '.'   ? CellState::Free
                                         : c == '#' ? CellState::Obstacle
                                                    : CellState::Target);
        }
    }
    const auto& hm = doc.at("height_map");
    aux.height_map.origin_x = hm.at("origin").at(0).get<double>();
    aux.height_map.origin_y = hm.at("origin").at(1).get<double>();
    aux.height_map.cell = hm.at("cell").get<double>();
    aux.height_map.width = hm.at("width").get<int>();
    aux.height_map.height = hm.at("height").get<int>();
    aux.height_map.values = hm.at("values").get<std::vector<double>>();
    return aux;
}

// ASCII PLY reader (vertex x/y/z properties only).
inline std::vector<Vec3> load_ply_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open PLY file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw IoError("not a PLY file: " + path);

    std::size_t vertex_count = 0;
    int x_idx = -1, y_idx = -1, z_idx = -1, prop_idx = 0;
    bool in_vertex_element = false, ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            ls >> word;
            ascii = word == "ascii";
        } else if (word == "element") {
            std::string name;
            ls >> name;
            in_vertex_element = name == "vertex";
            if (in_vertex_element) ls >> vertex_count;
        } else if (word == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            if (name == "x") x_idx = prop_idx;
            if (name == "y") y_idx = prop_idx;
            if (name == "z") z_idx = prop_idx;
            ++prop_idx;
        } else if (word == "end_header") {
            break;
        }
    }
    if (!ascii) throw IoError("only ASCII PLY is supported: " + path);
    if (x_idx < 0 || y_idx < 0 || z_idx < 0) throw IoError("PLY missing x/y/z properties: " + path);

    std::vector<Vec3> points;
    points.reserve(vertex_count);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (!std::getline(in, line)) throw IoError("PLY truncated: " + path);
        std::istringstream ls(line);
        double value = 0.0;
        Vec3 p = Vec3::Zero();
        for (int idx = 0; idx < prop_idx; ++idx) {
            if (!(ls >> value)) throw IoError("PLY vertex row malformed: " + path);
            if (idx == x_idx) p.x() = value;
            if (idx == y_idx) p.y() = value;
            if (idx == z_idx) p.z() = value;
        }
        points.push_back(p);
    }
    return points;
}

inline Scene scene_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    Scene scene;
    scene.ground_z = doc.value("ground_z", 0.0);
    const auto& aabb = doc.at("world_aabb");
    const auto& lo = aabb.at("min");
    const auto& hi = aabb.at("max");
    scene.world_aabb.min = Vec3(lo.at(0).get<double>(), lo.at(1).get<double>(), lo.at(2).get<double>());
    scene.world_aabb.max = Vec3(hi.at(0).get<double>(), hi.at(1).get<double>(), hi.at(2).get<double>());
    for (const auto& obj : doc.at("objects")) {
        SceneObject o;
        o.id = obj.at("id").get<int>();
        o.label = obj.at("label").get<std::string>();
        o.box = box_from_json(obj);
        if (obj.contains("points")) {
            const auto& flat = obj.at("points");
            if (flat.size() % 3 != 0) throw Error("scene: points must be flat xyz triples");
            for (std::size_t i = 0; i + 2 < flat.size(); i += 3) {
                o.points.emplace_back(flat.at(i).get<double>(), flat.at(i + 1).get<double>(),
                                      flat.at(i + 2).get<double>());
            }
        } else if (obj.contains("points_ply")) {
            const std::filesystem::path ply = obj.at("points_ply").get<std::string>();
            o.points = load_ply_points((ply.is_absolute() ? ply : base_dir / ply).string());
        }
        scene.objects.push_back(std::move(o));
    }
    scene.validate();
    return scene;
}

inline Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("scene file is not valid JSON: " + std::string(e.what()));
    }
    return scene_from_json(doc, std::filesystem::path(path).parent_path());
}

}  // namespace smg
