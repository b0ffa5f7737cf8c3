#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "smg/errors.hpp"
#include "smg/geometry.hpp"

// Kinematic skeleton: forward kinematics from root translation + exp-map
// joint rotations to world joint positions, its analytic Jacobian, and a
// capsule-sampled body surface used for scene-penetration queries.

namespace smg {

// Tree skeleton. Parents must be topologically ordered (parent[j] < j) with
// joint 0 as the pelvis root. bone_radii[j] is the capsule radius of the
// bone parent[j] -> j; entry 0 is unused.
struct SkeletonDef {
    std::string name;
    std::vector<std::string> joint_names;
    std::vector<int> parents;
    std::vector<Vec3> offsets;        // rest-pose offset from parent, meters
    std::vector<double> bone_radii;   // meters, indexed by child joint

    int joint_count() const { return static_cast<int>(parents.size()); }
    int param_count() const { return 3 + 3 * joint_count(); }

    void validate() const {
        const int j = joint_count();
        if (j < 1 || parents[0] != -1) throw Error("skeleton: joint 0 must be the root");
        if (static_cast<int>(offsets.size()) != j || static_cast<int>(bone_radii.size()) != j ||
            static_cast<int>(joint_names.size()) != j) {
            throw Error("skeleton: field sizes disagree");
        }
        for (int i = 1; i < j; ++i) {
            if (parents[i] < 0 || parents[i] >= i) throw Error("skeleton: parents must be topologically ordered");
            if (!(bone_radii[i] > 0.0)) throw Error("skeleton: bone radii must be positive");
            if (!offsets[i].allFinite()) throw Error("skeleton: offsets must be finite");
        }
    }

    int joint_index(const std::string& joint) const {
        for (int i = 0; i < joint_count(); ++i) {
            if (joint_names[i] == joint) return i;
        }
        return -1;
    }
};

// One frame: root translation plus one exp-map rotation per joint.
struct Pose {
    Vec3 root{Vec3::Zero()};
    std::vector<Vec3> rotations;

    static Pose rest(const SkeletonDef& skel, const Vec3& root = Vec3::Zero()) {
        Pose p;
        p.root = root;
        p.rotations.assign(skel.parents.size(), Vec3::Zero());
        return p;
    }
};

struct MotionSequence {
    std::vector<Pose> frames;
    double fps = 20.0;
};

// Joint world positions and rotations for one pose; the rotation cache is
// what the Jacobian and capsule sampling build on.
struct FkResult {
    std::vector<Vec3> positions;
    std::vector<Mat3> rotations;  // world rotation of each joint frame
};

inline void check_pose(const Pose& pose, const SkeletonDef& skel) {
    if (static_cast<int>(pose.rotations.size()) != skel.joint_count()) {
        throw DimensionMismatch("pose has " + std::to_string(pose.rotations.size()) +
                                " rotations, skeleton has " + std::to_string(skel.joint_count()) +
                                " joints");
    }
}

inline FkResult fk_full(const Pose& pose, const SkeletonDef& skel) {
    check_pose(pose, skel);
    const int j = skel.joint_count();
    FkResult out;
    out.positions.resize(j);
    out.rotations.resize(j);
    out.positions[0] = pose.root;
    out.rotations[0] = rotation_matrix(pose.rotations[0]);
    for (int i = 1; i < j; ++i) {
        const int p = skel.parents[i];
        out.positions[i] = out.positions[p] + out.rotations[p] * skel.offsets[i];
        out.rotations[i] = out.rotations[p] * rotation_matrix(pose.rotations[i]);
    }
    return out;
}

inline std::vector<Vec3> fk(const Pose& pose, const SkeletonDef& skel) {
    return fk_full(pose, skel).positions;
}

namespace detail {

// Per-joint 3x3 factor W_i * Jr(r_i): the derivative of any point rigidly
// attached below joint i w.r.t. r_i is -skew(point - pos_i) * B_i.
inline std::vector<Mat3> rotation_derivative_factors(const Pose& pose, const FkResult& fkr) {
    std::vector<Mat3> b(fkr.rotations.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = fkr.rotations[i] * so3_right_jacobian(pose.rotations[i]);
    }
    return b;
}

// Writes the 3x(3+3J) Jacobian of a world point attached to `joint`'s frame
// into `rows`. Ancestors of the attachment joint (inclusive) get rotation
// blocks; the root translation block is the identity.
inline void attached_point_jacobian(const SkeletonDef& skel, const FkResult& fkr,
                                    const std::vector<Mat3>& factors, int joint,
                                    const Vec3& point, Eigen::Ref<Eigen::MatrixXd> rows) {
    rows.setZero();
    rows.block<3, 3>(0, 0).setIdentity();
    for (int i = joint; i >= 0; i = skel.parents[i]) {
        rows.block<3, 3>(0, 3 + 3 * i) = -skew(point - fkr.positions[i]) * factors[i];
    }
}

}  // namespace detail

// Analytic Jacobian of all joint positions w.r.t. (root translation,
// exp-map rotations of every joint): 3J rows, 3+3J columns. Joint j's
// position depends on the rotations of its strict ancestors only.
inline Eigen::MatrixXd fk_jacobian(const Pose& pose, const SkeletonDef& skel) {
    const FkResult fkr = fk_full(pose, skel);
    const auto factors = detail::rotation_derivative_factors(pose, fkr);
    const int j = skel.joint_count();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * j, skel.param_count());
    for (int joint = 0; joint < j; ++joint) {
        jac.block<3, 3>(3 * joint, 0).setIdentity();
        // Start at the parent: a joint's own rotation does not move it.
        for (int i = skel.parents[joint]; i >= 0; i = skel.parents[i]) {
            jac.block<3, 3>(3 * joint, 3 + 3 * i) =
                -skew(fkr.positions[joint] - fkr.positions[i]) * factors[i];
        }
    }
    return jac;
}

// One body-surface sample with its pose Jacobian.
struct SurfaceSample {
    Vec3 point;
    int bone_child;               // bone is parents[bone_child] -> bone_child
    Eigen::Matrix<double, 3, Eigen::Dynamic> jacobian;  // 3 x (3+3J)
};

// Samples the capsule surface of every bone: `samples_per_bone` stations
// along the axis, each offset by the bone radius in 4 radial directions
// attached to the parent joint's frame. 4 * samples_per_bone * (J-1) points.
inline std::vector<SurfaceSample> skin_capsules(const Pose& pose, const SkeletonDef& skel,
                                                int samples_per_bone) {
    if (samples_per_bone < 2) throw DimensionMismatch("samples_per_bone must be >= 2");
    const FkResult fkr = fk_full(pose, skel);
    const auto factors = detail::rotation_derivative_factors(pose, fkr);
    const int j = skel.joint_count();

    std::vector<SurfaceSample> samples;
    samples.reserve(static_cast<std::size_t>(4 * samples_per_bone * (j - 1)));
    for (int child = 1; child < j; ++child) {
        const int parent = skel.parents[child];
        const Vec3& offset = skel.offsets[child];
        const double len = offset.norm();
        // Radial frame perpendicular to the bone in the parent's rest frame.
        const Vec3 axis = len > 1e-9 ? Vec3(offset / len) : Vec3::UnitZ();
        const Vec3 seed = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        const Vec3 u = axis.cross(seed).normalized();
        const Vec3 v = axis.cross(u);
        const double radius = skel.bone_radii[child];
        const Vec3 radial[4] = {u, v, -u, -v};

        for (int s = 0; s < samples_per_bone; ++s) {
            const double t = static_cast<double>(s) / (samples_per_bone - 1);
            for (const Vec3& dir : radial) {
                const Vec3 local = t * offset + radius * dir;
                SurfaceSample sample;
                sample.bone_child = child;
                sample.point = fkr.positions[parent] + fkr.rotations[parent] * local;
                sample.jacobian.resize(3, skel.param_count());
                detail::attached_point_jacobian(skel, fkr, factors, parent, sample.point,
                                                sample.jacobian);
                samples.push_back(std::move(sample));
            }
        }
    }
    return samples;
}

// The built-in 22-joint humanoid (pelvis root, Z up, facing +X, T-pose
// arms along Y). Heights assume the pelvis rests near z = 0.9 m standing.
inline SkeletonDef default_skeleton() {
    SkeletonDef s;
    s.name = "humanoid22";
    s.joint_names = {"pelvis",        "left_hip",       "right_hip",      "spine1",
                     "left_knee",     "right_knee",     "spine2",         "left_ankle",
                     "right_ankle",   "spine3",         "left_foot",      "right_foot",
                     "neck",          "left_collar",    "right_collar",   "head",
                     "left_shoulder", "right_shoulder", "left_elbow",     "right_elbow",
                     "left_wrist",    "right_wrist"};
    s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
    s.offsets = {
        {0.00, 0.00, 0.00},    // pelvis
        {0.00, 0.10, -0.01},   // left_hip
        {0.00, -0.10, -0.01},  // right_hip
        {0.00, 0.00, 0.12},    // spine1
        {0.00, 0.00, -0.40},   // left_knee
        {0.00, 0.00, -0.40},   // right_knee
        {0.00, 0.00, 0.13},    // spine2
        {0.00, 0.00, -0.42},   // left_ankle
        {0.00, 0.00, -0.42},   // right_ankle
        {0.00, 0.00, 0.13},    // spine3
        {0.13, 0.00, -0.02},   // left_foot
        {0.13, 0.00, -0.02},   // right_foot
        {0.00, 0.00, 0.10},    // neck
        {0.00, 0.08, 0.05},    // left_collar
        {0.00, -0.08, 0.05},   // right_collar
        {0.00, 0.00, 0.12},    // head
        {0.00, 0.10, 0.00},    // left_shoulder
        {0.00, -0.10, 0.00},   // right_shoulder
        {0.00, 0.26, 0.00},    // left_elbow
        {0.00, -0.26, 0.00},   // right_elbow
        {0.00, 0.25, 0.00},    // left_wrist
        {0.00, -0.25, 0.00},   // right_wrist
    };
    // Pelvis-girdle bones stay within 5 cm of the pelvis plane so a seat
    // clearance of +0.05 m leaves the capsule surface grazing, not inside.
    s.bone_radii = {0.10, 0.04, 0.04, 0.11, 0.06, 0.06, 0.11, 0.05, 0.05, 0.11, 0.035,
                    0.035, 0.05, 0.06, 0.06, 0.09, 0.05, 0.05, 0.045, 0.045, 0.04, 0.04};
    s.validate();
    return s;
}

// Default pelvis height above ground for a standing pose of the built-in
// skeleton (feet just above z = 0).
inline constexpr double kStandingPelvisHeight = 0.9;

}  // namespace smg
