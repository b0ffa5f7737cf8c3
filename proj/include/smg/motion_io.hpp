#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "smg/body_model.hpp"
#include "smg/errors.hpp"

// Motion and skeleton file formats. Output files are validated against
// their schema and written via a temp file + rename, so a failed run never
// leaves a partially written file behind.

namespace smg {

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

inline void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename failed for " + target.string() + ": " + ec.message());
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid JSON in " + path + ": " + e.what());
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Skeleton files
// ---------------------------------------------------------------------------

inline nlohmann::json skeleton_to_json(const SkeletonDef& skel) {
    nlohmann::json offsets = nlohmann::json::array();
    for (const auto& o : skel.offsets) offsets.push_back({o.x(), o.y(), o.z()});
    return {{"name", skel.name},
            {"joint_names", skel.joint_names},
            {"parents", skel.parents},
            {"offsets", offsets},
            {"bone_radii", skel.bone_radii}};
}

inline SkeletonDef skeleton_from_json(const nlohmann::json& doc) {
    SkeletonDef s;
    s.name = doc.value("name", "skeleton");
    s.joint_names = doc.at("joint_names").get<std::vector<std::string>>();
    s.parents = doc.at("parents").get<std::vector<int>>();
    s.bone_radii = doc.at("bone_radii").get<std::vector<double>>();
    for (const auto& o : doc.at("offsets")) {
        s.offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
    }
    s.validate();
    return s;
}

inline SkeletonDef load_skeleton(const std::string& path) {
    return skeleton_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Motion files
// ---------------------------------------------------------------------------

inline void validate_motion_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("fps") || !doc.contains("skeleton") ||
        !doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty()) {
        throw Error("motion document missing fps/skeleton/frames");
    }
    std::size_t joints = 0;
    for (const auto& f : doc["frames"]) {
        if (!f.contains("root") || f["root"].size() != 3 || !f.contains("rotations")) {
            throw Error("motion frame missing root[3]/rotations");
        }
        if (joints == 0) joints = f["rotations"].size();
        if (f["rotations"].size() != joints || joints == 0) {
            throw Error("motion frames disagree on joint count");
        }
    }
}

inline nlohmann::json motion_to_json(const MotionSequence& motion, const std::string& skeleton_name,
                                     std::optional<int> target_id = std::nullopt) {
    nlohmann::json frames = nlohmann::json::array();
    for (const Pose& p : motion.frames) {
        nlohmann::json rotations = nlohmann::json::array();
        for (const Vec3& r : p.rotations) rotations.push_back({r.x(), r.y(), r.z()});
        frames.push_back({{"root", {p.root.x(), p.root.y(), p.root.z()}}, {"rotations", rotations}});
    }
    nlohmann::json doc = {{"fps", motion.fps}, {"skeleton", skeleton_name}, {"frames", frames}};
    if (target_id) doc["target_id"] = *target_id;
    validate_motion_json(doc);
    return doc;
}

inline MotionSequence motion_from_json(const nlohmann::json& doc) {
    validate_motion_json(doc);
    MotionSequence m;
    m.fps = doc.at("fps").get<double>();
    for (const auto& f : doc.at("frames")) {
        Pose p;
        const auto& root = f.at("root");
        p.root = Vec3(root.at(0).get<double>(), root.at(1).get<double>(), root.at(2).get<double>());
        for (const auto& r : f.at("rotations")) {
            p.rotations.emplace_back(r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>());
        }
        m.frames.push_back(std::move(p));
    }
    return m;
}

inline MotionSequence load_motion(const std::string& path) {
    return motion_from_json(read_json_file(path));
}

// Derived joint positions, one row per (frame, joint), for visualization.
inline std::string positions_csv(const MotionSequence& motion, const SkeletonDef& skel) {
    std::ostringstream out;
    out << "frame,joint,x,y,z\n";
    for (std::size_t f = 0; f < motion.frames.size(); ++f) {
        const auto joints = fk(motion.frames[f], skel);
        for (int j = 0; j < skel.joint_count(); ++j) {
            const Vec3& p = joints[static_cast<std::size_t>(j)];
            out << f << ',' << skel.joint_names[static_cast<std::size_t>(j)] << ',' << p.x() << ','
                << p.y() << ',' << p.z() << '\n';
        }
    }
    return out.str();
}

}  // namespace smg
