#pragma once

#include <algorithm>
#include <vector>

#include "smg/body_model.hpp"
#include "smg/diffusion.hpp"
#include "smg/geometry.hpp"

// Geometric evaluation of generated motions: distance to the goal object,
// penetration-freeness against the scene, and target contact.

namespace smg {

inline constexpr double kContactThreshold = 0.05;  // m

struct EvalResult {
    double body_to_goal = 0.0;   // m, >= 0
    double non_collision = 1.0;  // fraction in [0, 1]
    bool contact = false;
    std::vector<double> per_frame_goal_distance;
    std::vector<double> per_frame_non_collision;
};

// Shortest distance over all frames and joints from the skeleton to the
// target box; 0 as soon as any joint is inside.
inline double body_to_goal(const MotionSequence& motion, const OrientedBox& target,
                           const SkeletonDef& skel, std::vector<double>* per_frame = nullptr) {
    if (motion.frames.empty()) throw Error("body_to_goal: motion is empty");
    double best = std::numeric_limits<double>::infinity();
    for (const Pose& pose : motion.frames) {
        double frame_best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : fk(pose, skel)) {
            frame_best = std::min(frame_best, std::max(0.0, box_sdf(p, target)));
        }
        if (per_frame != nullptr) per_frame->push_back(frame_best);
        best = std::min(best, frame_best);
    }
    return best;
}

// Fraction of (frame, capsule sample) pairs at or outside every obstacle
// surface; grazing contact (sdf = 0) counts as non-colliding.
inline double non_collision(const MotionSequence& motion, const SceneField& field,
                            const SkeletonDef& skel, int samples_per_bone = 2,
                            std::vector<double>* per_frame = nullptr) {
    if (motion.frames.empty()) return 1.0;
    std::size_t total = 0, clear = 0;
    for (const Pose& pose : motion.frames) {
        std::size_t frame_total = 0, frame_clear = 0;
        for (const auto& s : skin_capsules(pose, skel, samples_per_bone)) {
            ++frame_total;
            frame_clear += scene_sdf(s.point, field) >= 0.0;
        }
        if (per_frame != nullptr) {
            per_frame->push_back(frame_total == 0 ? 1.0
                                                  : static_cast<double>(frame_clear) / frame_total);
        }
        total += frame_total;
        clear += frame_clear;
    }
    return total == 0 ? 1.0 : static_cast<double>(clear) / static_cast<double>(total);
}

// True when any capsule sample of any frame comes closer to the target box
// than the threshold (points inside count as distance 0).
inline bool contact(const MotionSequence& motion, const OrientedBox& target, const SkeletonDef& skel,
                    double threshold = kContactThreshold, int samples_per_bone = 2) {
    for (const Pose& pose : motion.frames) {
        for (const auto& s : skin_capsules(pose, skel, samples_per_bone)) {
            if (std::max(0.0, box_sdf(s.point, target)) < threshold) return true;
        }
    }
    return false;
}

inline EvalResult evaluate_motion(const MotionSequence& motion, const SceneField& field,
                                  const OrientedBox& target, const SkeletonDef& skel,
                                  int samples_per_bone = 2,
                                  double contact_threshold = kContactThreshold) {
    EvalResult r;
    r.body_to_goal = body_to_goal(motion, target, skel, &r.per_frame_goal_distance);
    r.non_collision = non_collision(motion, field, skel, samples_per_bone, &r.per_frame_non_collision);
    r.contact = contact(motion, target, skel, contact_threshold, samples_per_bone);
    return r;
}

}  // namespace smg
