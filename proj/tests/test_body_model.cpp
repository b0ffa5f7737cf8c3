#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "smg/body_model.hpp"
#include "oracles.hpp"

using namespace smg;

namespace {

// Two-joint chain used by the hand-checked examples.
SkeletonDef chain2(const Vec3& offset = Vec3(1, 0, 0)) {
    SkeletonDef s;
    s.name = "chain2";
    s.joint_names = {"root", "tip"};
    s.parents = {-1, 0};
    s.offsets = {Vec3::Zero(), offset};
    s.bone_radii = {0.05, 0.05};
    return s;
}

Pose random_pose(const SkeletonDef& skel, std::mt19937& rng, double max_angle = 2.0) {
    std::uniform_real_distribution<double> t(-2.0, 2.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Pose p;
    p.root = Vec3(t(rng), t(rng), t(rng));
    p.rotations.resize(skel.parents.size());
    for (auto& r : p.rotations) {
        Vec3 axis(u(rng), u(rng), u(rng));
        if (axis.norm() < 1e-9) axis = Vec3::UnitX();
        r = axis.normalized() * (u(rng) * max_angle);
    }
    return p;
}

double jac_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(a.norm(), 1e-9);
}

}  // namespace

TEST_CASE("fk at identity accumulates rest offsets") {
    const SkeletonDef skel = default_skeleton();
    const Pose rest = Pose::rest(skel);
    const auto joints = fk(rest, skel);
    for (int j = 0; j < skel.joint_count(); ++j) {
        Vec3 expected = Vec3::Zero();
        for (int i = j; i >= 0; i = skel.parents[i]) expected += skel.offsets[i];
        CHECK((joints[j] - expected).norm() < 1e-12);
    }
}

TEST_CASE("fk rotates child offsets through the parent chain") {
    const SkeletonDef skel = chain2();
    Pose pose = Pose::rest(skel, Vec3(0.3, -0.2, 1.0));
    pose.rotations[0] = Vec3(0, 0, M_PI / 2);  // 90 degrees about Z
    const auto joints = fk(pose, skel);
    CHECK((joints[1] - (pose.root + Vec3(0, 1, 0))).norm() < 1e-12);
}

TEST_CASE("fk is equivariant under root translation") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(5);
    const Pose pose = random_pose(skel, rng);
    Pose shifted = pose;
    const Vec3 t(0.7, -1.3, 0.4);
    shifted.root += t;
    const auto a = fk(pose, skel);
    const auto b = fk(shifted, skel);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK((b[j] - a[j] - t).norm() < 1e-12);
}

TEST_CASE("fk is equivariant under global rotation of the root") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(31);
    const Pose pose = random_pose(skel, rng);
    const Vec3 r(0.3, -0.5, 0.9);
    const Mat3 rot = rotation_matrix(r);

    Pose rotated = pose;
    rotated.rotations[0] = log_map(rot * rotation_matrix(pose.rotations[0]));
    const auto a = fk(pose, skel);
    const auto b = fk(rotated, skel);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK((b[j] - pose.root - rot * (a[j] - pose.root)).norm() < 1e-9);
    }
}

TEST_CASE("bone lengths are pose-invariant") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const auto joints = fk(random_pose(skel, rng), skel);
        for (int j = 1; j < skel.joint_count(); ++j) {
            CHECK(std::abs((joints[j] - joints[skel.parents[j]]).norm() - skel.offsets[j].norm()) <
                  1e-9);
        }
    }
}

TEST_CASE("fk_jacobian structure: identity translation blocks, zero for non-ancestors") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(41);
    const Pose pose = random_pose(skel, rng);
    const Eigen::MatrixXd jac = fk_jacobian(pose, skel);
    REQUIRE(jac.rows() == 3 * skel.joint_count());
    REQUIRE(jac.cols() == skel.param_count());

    for (int j = 0; j < skel.joint_count(); ++j) {
        CHECK((jac.block<3, 3>(3 * j, 0) - Mat3::Identity()).norm() < 1e-12);
    }
    // left_wrist rotation cannot move right_wrist (kinematic independence),
    // and a joint's own rotation cannot move the joint itself.
    const int lw = skel.joint_index("left_wrist");
    const int rw = skel.joint_index("right_wrist");
    CHECK(jac.block<3, 3>(3 * rw, 3 + 3 * lw).norm() == 0.0);
    CHECK(jac.block<3, 3>(3 * lw, 3 + 3 * lw).norm() == 0.0);
}

TEST_CASE("fk_jacobian matches finite differences") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const Pose pose = random_pose(skel, rng);
        const Eigen::MatrixXd analytic = fk_jacobian(pose, skel);
        const Eigen::MatrixXd fd = oracles::fd_fk_jacobian(pose, skel);
        CHECK(jac_rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("skin_capsules sample count and containment") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(47);
    const Pose pose = random_pose(skel, rng);

    const auto samples = skin_capsules(pose, skel, 2);
    CHECK(samples.size() == static_cast<std::size_t>(8 * (skel.joint_count() - 1)));
    const auto more = skin_capsules(pose, skel, 5);
    CHECK(more.size() == static_cast<std::size_t>(20 * (skel.joint_count() - 1)));
    CHECK_THROWS_AS(skin_capsules(pose, skel, 1), DimensionMismatch);

    const auto joints = fk(pose, skel);
    for (const auto& s : samples) {
        const Vec3& a = joints[skel.parents[s.bone_child]];
        const Vec3& b = joints[s.bone_child];
        // Point-to-segment distance never exceeds the bone radius.
        const Vec3 ab = b - a;
        const double t = ab.squaredNorm() > 0 ? std::clamp((s.point - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
        const double dist = (s.point - (a + t * ab)).norm();
        CHECK(dist <= skel.bone_radii[s.bone_child] + 1e-9);
    }
}

TEST_CASE("capsule sample Jacobians match finite differences") {
    const SkeletonDef skel = default_skeleton();
    std::mt19937 rng(53);
    const int params = skel.param_count();

    for (int trial = 0; trial < 5; ++trial) {
        const Pose pose = random_pose(skel, rng);
        const auto samples = skin_capsules(pose, skel, 2);

        // Finite differences over the packed pose vector, re-skinning per
        // perturbation; compare a spread of sample indices.
        Eigen::VectorXd x(params);
        x.segment<3>(0) = pose.root;
        for (int j = 0; j < skel.joint_count(); ++j) x.segment<3>(3 + 3 * j) = pose.rotations[j];
        auto skin_at = [&](const Eigen::VectorXd& v, std::size_t idx) {
            Pose p;
            p.root = v.segment<3>(0);
            p.rotations.resize(skel.parents.size());
            for (int j = 0; j < skel.joint_count(); ++j) p.rotations[j] = v.segment<3>(3 + 3 * j);
            return skin_capsules(p, skel, 2)[idx].point;
        };
        for (std::size_t idx = 0; idx < samples.size(); idx += 17) {
            Eigen::MatrixXd fd(3, params);
            for (int c = 0; c < params; ++c) {
                Eigen::VectorXd lo = x, hi = x;
                lo[c] -= 1e-5;
                hi[c] += 1e-5;
                fd.col(c) = (skin_at(hi, idx) - skin_at(lo, idx)) / 2e-5;
            }
            CHECK(jac_rel_error(samples[idx].jacobian, fd) < 1e-4);
        }
    }
}

TEST_CASE("pose dimension mismatches are rejected") {
    const SkeletonDef skel = default_skeleton();
    Pose bad;
    bad.rotations.resize(3);
    CHECK_THROWS_AS(fk(bad, skel), DimensionMismatch);
    CHECK_THROWS_AS(fk_jacobian(bad, skel), DimensionMismatch);
}
