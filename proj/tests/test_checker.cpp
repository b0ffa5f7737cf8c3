#include <catch2/catch_amalgamated.hpp>

#include "smg/checker.hpp"

using namespace smg;

namespace {

// Small room with a floor slab and a bench target ~1.5 m from the start.
Scene bench_room() {
    Scene s;
    s.world_aabb = {Vec3(-0.5, -0.5, -0.6), Vec3(3.5, 3.5, 3.0)};
    s.ground_z = 0.0;
    SceneObject floor;
    floor.id = 1;
    floor.label = "floor";
    floor.box = {Vec3(1.5, 1.5, -0.1), Vec3(2.0, 2.0, 0.1), 0.0};
    SceneObject bench;
    bench.id = 2;
    bench.label = "bench";
    bench.box = {Vec3(2.4, 2.4, 0.2), Vec3(0.4, 0.4, 0.2), 0.0};
    s.objects = {floor, bench};
    return s;
}

PipelineInputs fast_inputs(const std::string& text = "walk to the bench") {
    PipelineInputs in;
    in.scene = bench_room();
    in.text = text;
    in.start = {1.4, 1.4};
    in.n_frames = 40;
    in.fps = 20.0;
    in.schedule = DiffusionSchedule::linear_beta(20, 1e-4, 0.1);
    in.seed = 11;
    return in;
}

}  // namespace

TEST_CASE("check passes a clean standing pose next to the target") {
    const Scene scene = bench_room();
    const SkeletonDef skel = default_skeleton();
    SpatialAuxiliary aux = compile(scene, "the bench", {});

    MotionSequence motion;
    motion.fps = 20.0;
    motion.frames.assign(3, Pose::rest(skel, Vec3(1.6, 2.4, 0.9)));
    const GuidanceSpec g = GuidanceSpec::empty(3, skel.joint_count(), 20.0);

    const CheckReport r = check(motion, scene, aux, g, skel);
    CHECK(r.in_bounds.passed);
    CHECK(r.collision_ok.passed);
    CHECK(r.goal_ok.passed);
    CHECK(r.guidance_ok.passed);
    CHECK(!r.semantics_ok.has_value());  // skipped without a client
    CHECK(r.passed);

    // Idempotence: re-checking the same inputs yields the same report.
    const CheckReport again = check(motion, scene, aux, g, skel);
    CHECK(report_to_json(r).dump() == report_to_json(again).dump());
}

TEST_CASE("check: translating the motion out of the room fails in_bounds") {
    const Scene scene = bench_room();
    const SkeletonDef skel = default_skeleton();
    SpatialAuxiliary aux = compile(scene, "the bench", {});
    MotionSequence motion;
    motion.fps = 20.0;
    motion.frames.assign(2, Pose::rest(skel, Vec3(101.6, 2.4, 0.9)));
    const CheckReport r =
        check(motion, scene, aux, GuidanceSpec::empty(2, skel.joint_count(), 20.0), skel);
    CHECK(!r.in_bounds.passed);
    CHECK(r.in_bounds.measured > 90.0);
    CHECK(!r.passed);
}

TEST_CASE("check: a frame deep inside a wall fails collision_ok") {
    Scene scene = bench_room();
    SceneObject wall;
    wall.id = 3;
    wall.label = "wall";
    wall.box = {Vec3(1.0, 1.0, 1.0), Vec3(0.5, 0.5, 1.0), 0.0};
    scene.objects.push_back(wall);
    const SkeletonDef skel = default_skeleton();
    SpatialAuxiliary aux = compile(scene, "the bench", {});

    MotionSequence motion;
    motion.fps = 20.0;
    motion.frames.assign(2, Pose::rest(skel, Vec3(2.4, 2.4, 0.9)));
    motion.frames[1].root = Vec3(1.2, 1.0, 0.9);  // torso 0.3 m inside the wall

    const CheckReport r =
        check(motion, scene, aux, GuidanceSpec::empty(2, skel.joint_count(), 20.0), skel);
    CHECK(!r.collision_ok.passed);
    CHECK(r.collision_ok.measured < 0.99);

    // Brute-force recount of the score.
    const SceneField field = scene_field(scene);
    std::size_t total = 0, clear = 0;
    for (const auto& pose : motion.frames) {
        for (const auto& s : skin_capsules(pose, skel, 2)) {
            ++total;
            clear += scene_sdf(s.point, field) >= 0.0;
        }
    }
    CHECK(r.collision_ok.measured ==
          Catch::Approx(static_cast<double>(clear) / total).margin(1e-12));
}

TEST_CASE("check: guidance RMSE compares FK against masked entries") {
    const Scene scene = bench_room();
    const SkeletonDef skel = default_skeleton();
    SpatialAuxiliary aux = compile(scene, "the bench", {});
    MotionSequence motion;
    motion.fps = 20.0;
    motion.frames.assign(2, Pose::rest(skel, Vec3(1.6, 2.4, 0.9)));

    GuidanceSpec g = GuidanceSpec::empty(2, skel.joint_count(), 20.0);
    g.set(0, 0, motion.frames[0].root + Vec3(0.2, 0.0, 0.0));  // 0.2 m off
    const CheckReport r = check(motion, scene, aux, g, skel);
    CHECK(r.guidance_ok.measured == Catch::Approx(0.2).margin(1e-12));
    CHECK(!r.guidance_ok.passed);
}

TEST_CASE("semantic verdicts are mandatory when evaluated, skipped on failure") {
    const Scene scene = bench_room();
    const SkeletonDef skel = default_skeleton();
    SpatialAuxiliary aux = compile(scene, "the bench", {});
    MotionSequence motion;
    motion.fps = 20.0;
    motion.frames.assign(2, Pose::rest(skel, Vec3(1.6, 2.4, 0.9)));
    const GuidanceSpec g = GuidanceSpec::empty(2, skel.joint_count(), 20.0);

    MockLlmClient yes;
    yes.reply("```json\n{\"semantics_ok\": true}\n```");
    CHECK(check(motion, scene, aux, g, skel, {}, 2, &yes, "walk").passed);

    MockLlmClient no;
    no.reply("```json\n{\"semantics_ok\": false}\n```");
    const CheckReport rejected = check(motion, scene, aux, g, skel, {}, 2, &no, "walk");
    REQUIRE(rejected.semantics_ok.has_value());
    CHECK(!rejected.semantics_ok->passed);
    CHECK(!rejected.passed);

    // Transport failure only degrades the semantic check to skipped.
    MockLlmClient broken;
    broken.fail("offline");
    const CheckReport degraded = check(motion, scene, aux, g, skel, {}, 2, &broken, "walk");
    CHECK(!degraded.semantics_ok.has_value());
    CHECK(degraded.passed);
}

TEST_CASE("run_with_retry: a passing first attempt performs no re-plan") {
    PipelineInputs in = fast_inputs();
    in.thresholds.goal_max = 5.0;
    in.thresholds.guidance_rmse_max = 2.0;
    in.thresholds.non_collision_min = 0.0;
    in.thresholds.bounds_inflation = 10.0;
    const PipelineResult r = run_with_retry(in, 1);
    CHECK(r.report.passed);
    CHECK(r.replans == 0);
}

TEST_CASE("run_with_retry: max_iters = 0 returns the failing motion immediately") {
    PipelineInputs in = fast_inputs();
    in.thresholds.goal_max = -1.0;  // impossible gate
    const PipelineResult r = run_with_retry(in, 0);
    CHECK(!r.report.passed);
    CHECK(r.replans == 0);
    CHECK(!r.motion.frames.empty());
}

TEST_CASE("run_with_retry: the loop performs at most max_iters re-plans") {
    PipelineInputs in = fast_inputs();
    in.thresholds.goal_max = -1.0;
    const PipelineResult r = run_with_retry(in, 1);
    CHECK(!r.report.passed);
    CHECK(r.replans == 1);
}

TEST_CASE("run_with_retry: seeded failure on attempt 1, success on attempt 2") {
    // The semantic verdict flips from no to yes: attempt 0 fails only on
    // semantics, the re-plan passes. Geometric gates are kept permissive so
    // the outcome is fully scripted.
    PipelineInputs in = fast_inputs();
    in.thresholds.goal_max = 5.0;
    in.thresholds.guidance_rmse_max = 2.0;
    in.thresholds.non_collision_min = 0.0;
    in.thresholds.bounds_inflation = 10.0;
    MockLlmClient mock;
    mock.reply("```json\n{\"semantics_ok\": false}\n```")
        .reply("```json\n{\"semantics_ok\": true}\n```");
    in.llm_semantics = true;
    in.client = &mock;

    const PipelineResult r = run_with_retry(in, 1);
    CHECK(r.report.passed);
    CHECK(r.replans == 1);
    CHECK(mock.call_count() == 2);
}

TEST_CASE("run_with_retry: unreachable targets and unknown actions propagate") {
    PipelineInputs in = fast_inputs("somersault onto the bench");
    CHECK_THROWS_AS(run_with_retry(in, 1), UnknownAction);

    PipelineInputs sealed = fast_inputs();
    SceneObject ring;
    ring.id = 9;
    ring.label = "ring";
    ring.box = {Vec3(2.4, 2.4, 0.5), Vec3(0.9, 0.9, 0.5), 0.0};
    sealed.scene.objects.push_back(ring);  // swallows the bench and its rim
    CHECK_THROWS_AS(run_with_retry(sealed, 1), Unreachable);
}
