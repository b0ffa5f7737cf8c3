#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "smg/body_model.hpp"
#include "smg/errors.hpp"
#include "smg/guidance.hpp"
#include "smg/llm_client.hpp"
#include "smg/llm_prompts.hpp"
#include "smg/scene_compiler.hpp"

// Motion planner: turns the spatial auxiliary plus a text instruction into
// masked joint-position guidance, either by deterministic rules or by an
// LLM rendered through the prompt templates.

namespace smg {

inline constexpr double kWalkSpeed = 1.2;          // m/s
inline constexpr double kWalkPelvisHeight = 0.9;   // m above ground
inline constexpr double kContactHeightOffset = 0.05;
inline constexpr double kContactHeightQuantile = 0.75;
inline constexpr double kContactPhaseFraction = 0.2;

struct PlanRequest {
    std::string text;
    SpatialAuxiliary aux;
    Eigen::Vector2d start{0.0, 0.0};  // meters; must fall on a FREE cell
    int n_frames = 120;
    double fps = 20.0;
};

// ---------------------------------------------------------------------------
// Grid path search
// ---------------------------------------------------------------------------

struct GridCell {
    int i = 0;
    int j = 0;
    bool operator==(const GridCell&) const = default;
};

// 8-connected shortest path (diagonal cost sqrt(2)) from `start` to the
// nearest cell satisfying `is_goal`, expanding FREE cells only. Ties break
// on lower g then row-major order. Returns an empty path when unreachable.
inline std::vector<GridCell> astar_path(const RoadMap& rm, GridCell start,
                                        const std::function<bool(GridCell)>& is_goal) {
    if (!rm.in_bounds(start.i, start.j) || rm.at(start.i, start.j) != CellState::Free) {
        throw Error("astar: start cell must be FREE");
    }
    const int w = rm.width, h = rm.height;
    const auto idx = [w](const GridCell& c) { return static_cast<std::size_t>(c.j) * w + c.i; };

    // Enumerate the goal set up front so the octile heuristic stays
    // admissible for an arbitrary goal predicate.
    std::vector<GridCell> goals;
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            if (is_goal({i, j})) goals.push_back({i, j});
        }
    }
    if (goals.empty()) return {};

    const double kDiag = std::sqrt(2.0);
    const auto heuristic = [&](const GridCell& c) {
        double best = 1e300;
        for (const auto& g : goals) {
            const double dx = std::abs(c.i - g.i), dy = std::abs(c.j - g.j);
            best = std::min(best, std::max(dx, dy) + (kDiag - 1.0) * std::min(dx, dy));
        }
        return best;
    };

    struct Node {
        double f, g;
        std::size_t index;
        bool operator>(const Node& o) const {
            if (f != o.f) return f > o.f;
            if (g != o.g) return g > o.g;
            return index > o.index;
        }
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
    std::vector<double> g_cost(static_cast<std::size_t>(w) * h, 1e300);
    std::vector<std::size_t> parent(static_cast<std::size_t>(w) * h, SIZE_MAX);
    std::vector<bool> closed(static_cast<std::size_t>(w) * h, false);

    g_cost[idx(start)] = 0.0;
    open.push({heuristic(start), 0.0, idx(start)});
    const int di[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dj[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    while (!open.empty()) {
        const Node node = open.top();
        open.pop();
        if (closed[node.index]) continue;
        closed[node.index] = true;
        const GridCell cell{static_cast<int>(node.index % w), static_cast<int>(node.index / w)};
        if (is_goal(cell)) {
            std::vector<GridCell> path{cell};
            for (std::size_t p = parent[node.index]; p != SIZE_MAX; p = parent[p]) {
                path.push_back({static_cast<int>(p % w), static_cast<int>(p / w)});
            }
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (int n = 0; n < 8; ++n) {
            const GridCell next{cell.i + di[n], cell.j + dj[n]};
            if (!rm.in_bounds(next.i, next.j) || rm.at(next.i, next.j) != CellState::Free) continue;
            const double step = n < 4 ? 1.0 : kDiag;
            const double g_new = node.g + step;
            if (g_new < g_cost[idx(next)] - 1e-12) {
                g_cost[idx(next)] = g_new;
                parent[idx(next)] = node.index;
                open.push({g_new + heuristic(next), g_new, idx(next)});
            }
        }
    }
    return {};
}

// FREE cell with a TARGET cell among its 8 neighbors: the walkable spots
// from which the target can be approached.
inline bool adjacent_to_target(const RoadMap& rm, GridCell c) {
    if (rm.at(c.i, c.j) != CellState::Free) return false;
    for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            if (rm.in_bounds(c.i + di, c.j + dj) && rm.at(c.i + di, c.j + dj) == CellState::Target) {
                return true;
            }
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Rule-based planning
// ---------------------------------------------------------------------------

enum class Action { Walk, Sit, Lie, Stand };

// Keyword table; extend here to teach the rule-based planner new verbs.
inline const std::map<std::string, Action>& action_table() {
    static const std::map<std::string, Action> table = {
        {"walk", Action::Walk},   {"walks", Action::Walk}, {"walking", Action::Walk},
        {"go", Action::Walk},     {"sit", Action::Sit},    {"sits", Action::Sit},
        {"sitting", Action::Sit}, {"lie", Action::Lie},    {"lies", Action::Lie},
        {"lying", Action::Lie},   {"lay", Action::Lie},    {"laying", Action::Lie},
        {"stand", Action::Stand}, {"stands", Action::Stand}, {"standing", Action::Stand},
    };
    return table;
}

inline Action classify_action(const std::string& text) {
    for (const auto& token : detail::tokenize(text)) {
        const auto it = action_table().find(token);
        if (it != action_table().end()) return it->second;
    }
    throw UnknownAction("no action keyword in: " + text);
}

namespace detail {

// Nearest-rank 0.75-quantile of the present height-map values, or the
// walking height when the map is empty.
inline double contact_height(const HeightMap& hm) {
    std::vector<double> values;
    for (const double v : hm.values) {
        if (v != kHeightMapNoData) values.push_back(v);
    }
    if (values.empty()) return kWalkPelvisHeight;
    std::sort(values.begin(), values.end());
    const auto idx = static_cast<std::size_t>(
        std::llround(kContactHeightQuantile * static_cast<double>(values.size() - 1)));
    return values[idx] + kContactHeightOffset;
}

inline GridCell nearest_target_cell(const RoadMap& rm, const Eigen::Vector2d& from) {
    GridCell best{-1, -1};
    double best_d = 1e300;
    for (int j = 0; j < rm.height; ++j) {
        for (int i = 0; i < rm.width; ++i) {
            if (rm.at(i, j) != CellState::Target) continue;
            const double d = (rm.cell_center(i, j) - from).norm();
            if (d < best_d) {
                best_d = d;
                best = {i, j};
            }
        }
    }
    return best;
}

}  // namespace detail

// Deterministic sub-task pipeline: classify the action, route to the target
// vicinity, resample the route into pelvis waypoints at walking speed, then
// synthesize target contact for the final frames. The pelvis follows one 3D
// polyline (route at walking height, then a vertical ramp onto the contact
// height), so consecutive waypoints never exceed the per-frame speed bound.
inline GuidanceSpec plan_rule_based(const PlanRequest& req, const SkeletonDef& skel) {
    const Action action = classify_action(req.text);
    const RoadMap& rm = req.aux.road_map;
    if (req.n_frames < 1) throw Error("plan: frame count must be >= 1");

    const auto [si, sj] = rm.cell_of(req.start.x(), req.start.y());
    const GridCell start{si, sj};
    if (!rm.in_bounds(si, sj) || rm.at(si, sj) != CellState::Free) {
        throw Error("plan: start position is not on a FREE cell");
    }
    const auto path =
        astar_path(rm, start, [&rm](GridCell c) { return adjacent_to_target(rm, c); });
    if (path.empty()) throw Unreachable("no free path from start to the target vicinity");

    // Waypoint polyline in 3D at walking height.
    std::vector<Vec3> polyline;
    polyline.emplace_back(req.start.x(), req.start.y(), kWalkPelvisHeight);
    for (std::size_t p = 1; p < path.size(); ++p) {
        const auto c = rm.cell_center(path[p].i, path[p].j);
        polyline.emplace_back(c.x(), c.y(), kWalkPelvisHeight);
    }

    const bool has_contact = action == Action::Sit || action == Action::Lie;
    double contact_z = kWalkPelvisHeight;
    Eigen::Vector2d contact_xy = polyline.back().head<2>();
    if (has_contact) {
        contact_z = detail::contact_height(req.aux.height_map);
        const GridCell tc = detail::nearest_target_cell(rm, polyline.back().head<2>());
        if (tc.i < 0) throw Unreachable("road map has no TARGET cells");
        contact_xy = rm.cell_center(tc.i, tc.j);
        polyline.emplace_back(contact_xy.x(), contact_xy.y(), kWalkPelvisHeight);
        polyline.emplace_back(contact_xy.x(), contact_xy.y(), contact_z);
    }

    std::vector<double> cumulative{0.0};
    for (std::size_t p = 1; p < polyline.size(); ++p) {
        cumulative.push_back(cumulative.back() + (polyline[p] - polyline[p - 1]).norm());
    }
    const double total_len = cumulative.back();
    const double step = kWalkSpeed / req.fps;
    const int contact_frames = static_cast<int>(std::ceil(kContactPhaseFraction * req.n_frames));
    const int contact_start = req.n_frames - contact_frames;
    if (total_len > step * contact_start) {
        throw Error("plan: frame budget too small to reach the target at walking speed");
    }

    const auto point_at = [&](double dist) {
        dist = std::clamp(dist, 0.0, total_len);
        for (std::size_t p = 1; p < polyline.size(); ++p) {
            if (dist <= cumulative[p] || p + 1 == polyline.size()) {
                const double seg = cumulative[p] - cumulative[p - 1];
                const double t = seg > 1e-12 ? (dist - cumulative[p - 1]) / seg : 1.0;
                return Vec3(polyline[p - 1] + t * (polyline[p] - polyline[p - 1]));
            }
        }
        return polyline.back();
    };

    GuidanceSpec g = GuidanceSpec::empty(req.n_frames, skel.joint_count(), req.fps);
    const int pelvis = 0;
    for (int f = 0; f < req.n_frames; ++f) {
        g.set(f, pelvis, point_at(f * step));
    }

    if (action == Action::Lie) {
        // Head displaced from the pelvis along the target's long footprint
        // axis, flipped toward the box center and shrunk until its cell is
        // walkable or target.
        const OrientedBox& box = req.aux.target_box;
        const bool x_long = box.half_extents.x() >= box.half_extents.y();
        Vec3 axis = box.to_world_dir(x_long ? Vec3::UnitX() : Vec3::UnitY());
        axis.z() = 0.0;
        axis.normalize();
        const Eigen::Vector2d to_center = box.center.head<2>() - contact_xy;
        if (axis.head<2>().dot(to_center) < 0.0) axis = -axis;

        double spine = 0.0;  // pelvis-to-head distance in the rest pose
        for (int j = skel.joint_index("head"); j > 0; j = skel.parents[j]) spine += skel.offsets[j].norm();
        Vec3 head(contact_xy.x() + spine * axis.x(), contact_xy.y() + spine * axis.y(), contact_z);
        for (double scale = 1.0; scale > 0.1; scale *= 0.5) {
            const auto [hi, hj] = rm.cell_of(contact_xy.x() + scale * spine * axis.x(),
                                             contact_xy.y() + scale * spine * axis.y());
            if (rm.in_bounds(hi, hj) && rm.at(hi, hj) != CellState::Obstacle) {
                head.head<2>() = contact_xy + scale * spine * axis.head<2>();
                break;
            }
        }
        const int head_joint = skel.joint_index("head");
        for (int f = contact_start; f < req.n_frames; ++f) g.set(f, head_joint, head);
    }

    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// LLM planning
// ---------------------------------------------------------------------------

namespace detail {

inline std::string height_map_text(const HeightMap& hm) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    for (int j = hm.height - 1; j >= 0; --j) {
        for (int i = 0; i < hm.width; ++i) {
            out << (i > 0 ? " " : "") << hm.at(i, j);
        }
        out << "\n";
    }
    return out.str();
}

inline std::string planner_user_prompt(const PlanRequest& req) {
    const RoadMap& rm = req.aux.road_map;
    std::ostringstream out;
    out << "Instruction: " << req.text << "\n"
        << "Frames N = " << req.n_frames << ", frame rate = " << req.fps << " fps\n"
        << "Start position: (" << req.start.x() << ", " << req.start.y() << ")\n"
        << "Road map (cell " << rm.cell << " m, origin (" << rm.origin_x << ", " << rm.origin_y
        << "), printed north-up):\n"
        << roadmap_ascii(rm) << "Target box: center (" << req.aux.target_box.center.x() << ", "
        << req.aux.target_box.center.y() << ", " << req.aux.target_box.center.z()
        << "), half extents (" << req.aux.target_box.half_extents.x() << ", "
        << req.aux.target_box.half_extents.y() << ", " << req.aux.target_box.half_extents.z()
        << "), yaw " << req.aux.target_box.yaw << "\n"
        << "Height map of the target (m, -1 = no data, north-up):\n"
        << height_map_text(req.aux.height_map);
    return out.str();
}

// Parses {"frames":[{"index":i,"joints":{"name":[x,y,z]}}]}; throws
// BoundsViolation for positions outside the road-map rectangle or frame
// indices outside [0, N), ParseFailure for structural problems.
inline GuidanceSpec parse_llm_guidance(const nlohmann::json& doc, const PlanRequest& req,
                                       const SkeletonDef& skel) {
    if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array()) {
        throw ParseFailure("guidance JSON missing frames array");
    }
    const RoadMap& rm = req.aux.road_map;
    const double x0 = rm.origin_x, x1 = rm.origin_x + rm.width * rm.cell;
    const double y0 = rm.origin_y, y1 = rm.origin_y + rm.height * rm.cell;

    GuidanceSpec g = GuidanceSpec::empty(req.n_frames, skel.joint_count(), req.fps);
    for (const auto& frame : doc["frames"]) {
        if (!frame.contains("index") || !frame["index"].is_number_integer()) {
            throw ParseFailure("guidance frame missing integer index");
        }
        const int f = frame["index"].get<int>();
        if (f < 0 || f >= req.n_frames) {
            throw BoundsViolation("guidance frame index outside [0, N)");
        }
        if (!frame.contains("joints") || !frame["joints"].is_object()) {
            throw ParseFailure("guidance frame missing joints object");
        }
        for (const auto& [name, pos] : frame["joints"].items()) {
            const int joint = skel.joint_index(name);
            if (joint < 0) throw ParseFailure("unknown joint name: " + name);
            if (!pos.is_array() || pos.size() != 3) throw ParseFailure("joint position must be [x,y,z]");
            const Vec3 p(pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>());
            if (!p.allFinite()) throw ParseFailure("joint position must be finite");
            if (p.x() < x0 || p.x() > x1 || p.y() < y0 || p.y() > y1) {
                throw BoundsViolation("joint position outside the road-map bounds");
            }
            g.set(f, joint, p);
        }
    }
    g.validate();
    return g;
}

}  // namespace detail

// LLM planner: renders the prompt template, requires a fenced JSON guidance
// block, re-prompts up to twice on unparseable replies. Bounds violations
// and transport failures are not retried here.
inline GuidanceSpec plan_llm(const PlanRequest& req, const SkeletonDef& skel, LlmClient& client,
                             const std::string& model = "gpt-4",
                             const std::string& failure_note = "") {
    ChatRequest chat{model, {{"system", prompts::kPlannerSystem}}, 0.0, 4096};
    std::string user = detail::planner_user_prompt(req);
    if (!failure_note.empty()) user += "\n" + prompts::planner_retry_note(failure_note);
    chat.messages.push_back({"user", user});

    constexpr int kRePrompts = 2;
    std::string last_error;
    for (int attempt = 0; attempt <= kRePrompts; ++attempt) {
        const std::string reply = client.complete(chat);
        try {
            return detail::parse_llm_guidance(extract_json_block(reply), req, skel);
        } catch (const BoundsViolation&) {
            throw;
        } catch (const ParseFailure& e) {
            last_error = e.what();
            chat.messages.push_back({"assistant", reply});
            chat.messages.push_back(
                {"user", "That reply was not usable (" + last_error +
                             "). Reply again with exactly one fenced JSON block in the required "
                             "format."});
        }
    }
    throw ParseFailure("no valid guidance after 2 re-prompts; last error: " + last_error);
}

}  // namespace smg
