#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "smg/metrics.hpp"

using namespace smg;

namespace {

SkeletonDef chain2(const Vec3& offset = Vec3(0.3, 0, 0), double radius = 0.05) {
    SkeletonDef s;
    s.name = "chain2";
    s.joint_names = {"root", "tip"};
    s.parents = {-1, 0};
    s.offsets = {Vec3::Zero(), offset};
    s.bone_radii = {radius, radius};
    return s;
}

MotionSequence static_pose(const SkeletonDef& skel, const Vec3& root, int frames = 1) {
    MotionSequence m;
    m.fps = 20.0;
    m.frames.assign(static_cast<std::size_t>(frames), Pose::rest(skel, root));
    return m;
}

}  // namespace

TEST_CASE("body_to_goal: containment, the 0.71 fixture, and face distance") {
    const SkeletonDef skel = chain2();
    const OrientedBox box{Vec3::Zero(), Vec3(0.5, 0.5, 0.5), 0.0};

    CHECK(body_to_goal(static_pose(skel, Vec3(0.1, 0.0, 0.2)), box, skel) == 0.0);

    // Closest joint placed exactly 0.71 m from the +X face.
    const double d = body_to_goal(static_pose(skel, Vec3(1.21, 0.0, 0.0)), box, skel);
    CHECK(d == Catch::Approx(0.71).margin(1e-12));

    // Plain face distance by hand geometry.
    CHECK(body_to_goal(static_pose(skel, Vec3(0.87, 0.0, 0.0)), box, skel) ==
          Catch::Approx(0.37).margin(1e-12));

    MotionSequence empty;
    CHECK_THROWS_AS(body_to_goal(empty, box, skel), Error);
}

TEST_CASE("non_collision: free space, exact straddle, grazing contact") {
    const SkeletonDef skel = chain2(Vec3(2, 0, 0), 0.5);
    const MotionSequence motion = static_pose(skel, Vec3::Zero());

    SceneField empty;
    CHECK(non_collision(motion, empty, skel) == 1.0);

    // The 8 samples sit at x=0 and x=2; a box swallowing the x=0 station
    // leaves exactly half the samples penetrating.
    SceneField half;
    half.boxes.push_back({Vec3(0, 0, 0), Vec3(0.8, 0.8, 0.8), 0.0});
    CHECK(non_collision(motion, half, skel) == Catch::Approx(0.5).margin(1e-12));
    // Brute-force recount.
    std::size_t inside = 0;
    const auto samples = skin_capsules(motion.frames[0], skel, 2);
    for (const auto& s : samples) inside += scene_sdf(s.point, half) < 0.0;
    CHECK(inside == samples.size() / 2);

    // A face exactly touching the samples counts as non-colliding.
    SceneField graze;
    graze.boxes.push_back({Vec3(-1, 0, 0), Vec3(1.0, 2.0, 2.0), 0.0});
    CHECK(non_collision(motion, graze, skel) == 1.0);
}

TEST_CASE("non_collision is monotone under obstacle growth") {
    const SkeletonDef skel = default_skeleton();
    const MotionSequence motion = static_pose(skel, Vec3(0, 0, 0.9), 3);
    for (double grow = 0.0; grow < 1.0; grow += 0.2) {
        SceneField small, big;
        small.boxes.push_back({Vec3(0.3, 0, 0.8), Vec3(0.2 + grow, 0.3, 0.3), 0.0});
        big.boxes.push_back({Vec3(0.3, 0, 0.8), Vec3(0.2 + grow + 0.2, 0.3, 0.3), 0.0});
        CHECK(non_collision(motion, big, skel) <= non_collision(motion, small, skel) + 1e-12);
    }
}

TEST_CASE("contact: threshold fixtures on both sides") {
    const SkeletonDef skel = chain2(Vec3(2, 0, 0), 0.04);
    const OrientedBox wall{Vec3(-1, 0, 0), Vec3(1.0, 3.0, 3.0), 0.0};  // face at x = 0

    CHECK(contact(static_pose(skel, Vec3(0.049, 0, 0)), wall, skel));
    CHECK(!contact(static_pose(skel, Vec3(0.051, 0, 0)), wall, skel));
    CHECK(!contact(static_pose(skel, Vec3(1.0, 0, 0)), wall, skel));

    // Resting on the target: grazing samples count as contact.
    const SkeletonDef human = default_skeleton();
    const OrientedBox couch{Vec3(0, 0, 0.225), Vec3(0.45, 1.0, 0.225), 0.0};
    CHECK(contact(static_pose(human, Vec3(0, 0, 0.5)), couch, human));
}

TEST_CASE("metrics are invariant under joint translation of motion and scene") {
    const SkeletonDef skel = default_skeleton();
    const Vec3 shift(3.7, -1.9, 0.6);

    MotionSequence motion = static_pose(skel, Vec3(0.4, 0.1, 0.9), 2);
    motion.frames[1].rotations[3] = Vec3(0.2, 0.1, -0.3);

    OrientedBox target{Vec3(0.6, 0, 0.3), Vec3(0.3, 0.4, 0.3), 0.25};
    SceneField field;
    field.boxes.push_back(target);
    field.boxes.push_back({Vec3(-0.5, 0.5, 0.5), Vec3(0.3, 0.3, 0.5), -0.4});

    MotionSequence moved = motion;
    for (auto& f : moved.frames) f.root += shift;
    OrientedBox target2 = target;
    target2.center += shift;
    SceneField field2 = field;
    for (auto& b : field2.boxes) b.center += shift;

    CHECK(body_to_goal(motion, target, skel) ==
          Catch::Approx(body_to_goal(moved, target2, skel)).margin(1e-9));
    CHECK(non_collision(motion, field, skel) ==
          Catch::Approx(non_collision(moved, field2, skel)).margin(1e-9));
    CHECK(contact(motion, target, skel) == contact(moved, target2, skel));
}

TEST_CASE("body_to_goal is zero exactly when some joint touches the box") {
    const SkeletonDef skel = chain2();
    const OrientedBox box{Vec3(0.5, 0.5, 0.5), Vec3(0.4, 0.3, 0.5), 0.3};
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-1.5, 2.5);
    for (int i = 0; i < 200; ++i) {
        const MotionSequence m = static_pose(skel, Vec3(u(rng), u(rng), u(rng)));
        bool touching = false;
        for (const Vec3& p : fk(m.frames[0], skel)) touching |= box_sdf(p, box) <= 0.0;
        CHECK((body_to_goal(m, box, skel) == 0.0) == touching);
    }
}

TEST_CASE("evaluate_motion aggregates the three metrics with traces") {
    const SkeletonDef skel = default_skeleton();
    const MotionSequence motion = static_pose(skel, Vec3(0, 0, 0.9), 4);
    OrientedBox target{Vec3(0.8, 0, 0.2), Vec3(0.3, 0.3, 0.2), 0.0};
    SceneField field;
    field.boxes.push_back(target);

    const EvalResult r = evaluate_motion(motion, field, target, skel);
    CHECK(r.per_frame_goal_distance.size() == 4);
    CHECK(r.per_frame_non_collision.size() == 4);
    CHECK(r.body_to_goal >= 0.0);
    CHECK(r.non_collision >= 0.0);
    CHECK(r.non_collision <= 1.0);
}
