#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "smg/errors.hpp"
#include "smg/geometry.hpp"

// Masked skeleton guidance: sparse 3D joint-position constraints over
// frames, selected by a binary (frame, joint) mask.

namespace smg {

struct GuidanceSpec {
    int n_frames = 0;
    int n_joints = 0;
    double fps = 20.0;
    std::vector<Vec3> positions;   // n_frames * n_joints, row-major by frame
    std::vector<std::uint8_t> mask;

    static GuidanceSpec empty(int frames, int joints, double fps) {
        GuidanceSpec g;
        g.n_frames = frames;
        g.n_joints = joints;
        g.fps = fps;
        g.positions.assign(static_cast<std::size_t>(frames) * joints, Vec3::Zero());
        g.mask.assign(static_cast<std::size_t>(frames) * joints, 0);
        return g;
    }

    std::size_t index(int frame, int joint) const {
        return static_cast<std::size_t>(frame) * n_joints + joint;
    }
    bool masked(int frame, int joint) const { return mask[index(frame, joint)] != 0; }
    const Vec3& at(int frame, int joint) const { return positions[index(frame, joint)]; }
    void set(int frame, int joint, const Vec3& p) {
        positions[index(frame, joint)] = p;
        mask[index(frame, joint)] = 1;
    }
    std::size_t masked_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m != 0;
        return n;
    }

    void validate() const {
        if (n_frames < 1 || n_joints < 1) throw Error("guidance: N and J must be >= 1");
        if (fps <= 0) throw Error("guidance: fps must be positive");
        const std::size_t expect = static_cast<std::size_t>(n_frames) * n_joints;
        if (positions.size() != expect || mask.size() != expect) {
            throw Error("guidance: storage size mismatch");
        }
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i] && !positions[i].allFinite()) {
                throw Error("guidance: masked entry is not finite");
            }
        }
    }
};

// Sparse JSON form: only masked entries are listed.
inline nlohmann::json guidance_to_json(const GuidanceSpec& g) {
    nlohmann::json entries = nlohmann::json::array();
    for (int f = 0; f < g.n_frames; ++f) {
        for (int j = 0; j < g.n_joints; ++j) {
            if (!g.masked(f, j)) continue;
            const Vec3& p = g.at(f, j);
            entries.push_back({{"frame", f}, {"joint", j}, {"x", p.x()}, {"y", p.y()}, {"z", p.z()}});
        }
    }
    return {{"n", g.n_frames}, {"j", g.n_joints}, {"fps", g.fps}, {"entries", entries}};
}

inline GuidanceSpec guidance_from_json(const nlohmann::json& doc) {
    GuidanceSpec g = GuidanceSpec::empty(doc.at("n").get<int>(), doc.at("j").get<int>(),
                                         doc.at("fps").get<double>());
    for (const auto& e : doc.at("entries")) {
        const int f = e.at("frame").get<int>();
        const int j = e.at("joint").get<int>();
        if (f < 0 || f >= g.n_frames || j < 0 || j >= g.n_joints) {
            throw Error("guidance: entry index out of range");
        }
        g.set(f, j, Vec3(e.at("x").get<double>(), e.at("y").get<double>(), e.at("z").get<double>()));
    }
    g.validate();
    return g;
}

}  // namespace smg
