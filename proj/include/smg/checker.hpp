#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "smg/diffusion.hpp"
#include "smg/llm_client.hpp"
#include "smg/llm_prompts.hpp"
#include "smg/metrics.hpp"
#include "smg/planner.hpp"
#include "smg/scene_compiler.hpp"

// Motion checker: validates a generated motion against the scene, the
// guidance and (optionally) the instruction semantics via an LLM, and runs
// the bounded plan -> sample -> check retry loop.

namespace smg {

struct CheckThresholds {
    double bounds_inflation = 0.1;      // m beyond the world AABB
    double non_collision_min = 0.99;
    double goal_max = 0.5;              // m
    double guidance_rmse_max = 0.10;    // m over masked entries
};

struct CheckItem {
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
};

struct CheckReport {
    bool passed = false;
    CheckItem in_bounds;
    CheckItem collision_ok;
    CheckItem goal_ok;
    CheckItem guidance_ok;
    std::optional<CheckItem> semantics_ok;  // empty when skipped (no client or LLM failure)
};

inline nlohmann::json check_item_to_json(const CheckItem& c) {
    return {{"passed", c.passed}, {"measured", c.measured}, {"threshold", c.threshold}};
}

inline nlohmann::json report_to_json(const CheckReport& r) {
    nlohmann::json doc = {{"passed", r.passed},
                          {"in_bounds", check_item_to_json(r.in_bounds)},
                          {"collision_ok", check_item_to_json(r.collision_ok)},
                          {"goal_ok", check_item_to_json(r.goal_ok)},
                          {"guidance_ok", check_item_to_json(r.guidance_ok)}};
    doc["semantics_ok"] =
        r.semantics_ok ? check_item_to_json(*r.semantics_ok) : nlohmann::json{{"skipped", true}};
    return doc;
}

// Root-mean-square distance between FK joint positions and the masked
// guidance entries; 0 when nothing is masked.
inline double guidance_rmse(const MotionSequence& motion, const GuidanceSpec& g,
                            const SkeletonDef& skel) {
    double sum = 0.0;
    std::size_t count = 0;
    const int frames = std::min<int>(g.n_frames, static_cast<int>(motion.frames.size()));
    for (int f = 0; f < frames; ++f) {
        std::optional<std::vector<Vec3>> joints;
        for (int j = 0; j < g.n_joints; ++j) {
            if (!g.masked(f, j)) continue;
            if (!joints) joints = fk(motion.frames[static_cast<std::size_t>(f)], skel);
            sum += ((*joints)[static_cast<std::size_t>(j)] - g.at(f, j)).squaredNorm();
            ++count;
        }
    }
    return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

// Compact numeric description sent to the LLM for the semantic verdict:
// decimated pelvis trajectory, worst scene clearance, final joint layout.
inline std::string motion_summary(const MotionSequence& motion, const SceneField& field,
                                  const SkeletonDef& skel) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "Pelvis trajectory (x, y, z):\n";
    const std::size_t n = motion.frames.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 10);
    for (std::size_t f = 0; f < n; f += stride) {
        const Vec3& p = motion.frames[f].root;
        out << "  frame " << f << ": (" << p.x() << ", " << p.y() << ", " << p.z() << ")\n";
    }
    double min_sdf = kFreeSpaceDistance;
    for (const Pose& pose : motion.frames) {
        for (const Vec3& p : fk(pose, skel)) min_sdf = std::min(min_sdf, scene_sdf(p, field));
    }
    out << "Minimum joint clearance to the scene: " << min_sdf << " m\n";
    out << "Final-frame joints:\n";
    const auto joints = fk(motion.frames.back(), skel);
    for (int j = 0; j < skel.joint_count(); ++j) {
        const Vec3& p = joints[static_cast<std::size_t>(j)];
        out << "  " << skel.joint_names[static_cast<std::size_t>(j)] << ": (" << p.x() << ", "
            << p.y() << ", " << p.z() << ")\n";
    }
    return out.str();
}

// Runs all checks. The four geometric checks are mandatory; the semantic
// check runs only when a client is supplied, and an LLM failure degrades it
// to skipped instead of failing the call.
inline CheckReport check(const MotionSequence& motion, const Scene& scene,
                         const SpatialAuxiliary& aux, const GuidanceSpec& g,
                         const SkeletonDef& skel, const CheckThresholds& thresholds = {},
                         int samples_per_bone = 2, LlmClient* client = nullptr,
                         const std::string& text = "", const std::string& model = "gpt-4") {
    if (motion.frames.empty()) throw Error("check: motion is empty");
    const SceneField field = scene_field(scene);
    CheckReport r;

    double worst_exceed = -std::numeric_limits<double>::infinity();
    for (const Pose& pose : motion.frames) {
        for (const Vec3& p : fk(pose, skel)) {
            worst_exceed = std::max(worst_exceed, scene.world_aabb.exceedance(p));
        }
    }
    r.in_bounds = {worst_exceed <= thresholds.bounds_inflation, std::max(0.0, worst_exceed),
                   thresholds.bounds_inflation};

    const double nc = non_collision(motion, field, skel, samples_per_bone);
    r.collision_ok = {nc >= thresholds.non_collision_min, nc, thresholds.non_collision_min};

    const double goal = body_to_goal(motion, aux.target_box, skel);
    r.goal_ok = {goal <= thresholds.goal_max, goal, thresholds.goal_max};

    const double rmse = guidance_rmse(motion, g, skel);
    r.guidance_ok = {rmse <= thresholds.guidance_rmse_max, rmse, thresholds.guidance_rmse_max};

    r.passed = r.in_bounds.passed && r.collision_ok.passed && r.goal_ok.passed && r.guidance_ok.passed;

    if (client != nullptr) {
        try {
            ChatRequest req{model,
                            {{"system", prompts::kCheckerSystem},
                             {"user", "Instruction: " + text + "\n" + motion_summary(motion, field, skel)}},
                            0.0,
                            256};
            const nlohmann::json verdict = extract_json_block(client->complete(req));
            if (verdict.contains("semantics_ok") && verdict["semantics_ok"].is_boolean()) {
                const bool ok = verdict["semantics_ok"].get<bool>();
                r.semantics_ok = CheckItem{ok, ok ? 1.0 : 0.0, 1.0};
                r.passed = r.passed && ok;
            }
        } catch (const LlmFailure&) {
            // skipped
        } catch (const ParseFailure&) {
            // skipped
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Bounded retry loop
// ---------------------------------------------------------------------------

struct PipelineInputs {
    Scene scene;
    std::string text;
    Eigen::Vector2d start{0.0, 0.0};
    int n_frames = 120;
    double fps = 20.0;
    double cell = kDefaultCellSize;
    SkeletonDef skel = default_skeleton();
    DiffusionSchedule schedule = default_schedule();
    GuidanceConfig guidance_cfg;
    CheckThresholds thresholds;
    std::uint64_t seed = 7;
    double sigma_prior = 0.5;
    const Denoiser* denoiser = nullptr;  // null -> Gaussian rest-pose prior
    bool llm_planner = false;
    bool llm_locator = false;
    bool llm_semantics = false;
    LlmClient* client = nullptr;
    std::string model = "gpt-4";
};

struct PipelineResult {
    MotionSequence motion;
    CheckReport report;
    GuidanceSpec guidance;
    SpatialAuxiliary aux;
    int replans = 0;  // re-plan iterations actually performed
};

namespace detail {

inline std::string failure_note(const CheckReport& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    auto line = [&](const char* name, const CheckItem& c) {
        out << name << ": " << (c.passed ? "ok" : "failed") << " (measured " << c.measured
            << ", threshold " << c.threshold << ")\n";
    };
    line("in_bounds", r.in_bounds);
    line("collision_ok", r.collision_ok);
    line("goal_ok", r.goal_ok);
    line("guidance_ok", r.guidance_ok);
    return out.str();
}

// Deterministic start perturbation for rule-based re-plans: the n-th FREE
// cell center around the original start cell.
inline Eigen::Vector2d perturb_start(const RoadMap& rm, const Eigen::Vector2d& start, int attempt) {
    if (attempt == 0) return start;
    const auto [si, sj] = rm.cell_of(start.x(), start.y());
    const int di[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dj[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    int seen = 0;
    for (int n = 0; n < 8; ++n) {
        const int i = si + di[n], j = sj + dj[n];
        if (!rm.in_bounds(i, j) || rm.at(i, j) != CellState::Free) continue;
        if (++seen == attempt) return rm.cell_center(i, j);
    }
    return start;
}

}  // namespace detail

// generate -> check; on failure, re-plan (perturbed start + fresh sampler
// seed for the rule planner, failure-annotated prompt for the LLM planner)
// at most max_iters times. Always returns the last motion and report.
inline PipelineResult run_with_retry(const PipelineInputs& in, int max_iters = 1) {
    if (max_iters < 0) throw Error("run_with_retry: max_iters must be >= 0");
    in.scene.validate();
    in.schedule.validate();

    PipelineResult result;
    TargetLocator locator;
    if (in.llm_locator) {
        if (in.client == nullptr) throw Error("run_with_retry: llm locator needs a client");
        locator.client = in.client;
        locator.model = in.model;
    }
    result.aux = compile(in.scene, in.text, locator, in.cell);
    const SceneField field = scene_field(in.scene);

    std::optional<GaussianPriorDenoiser> default_denoiser;
    const Denoiser* denoiser = in.denoiser;
    if (denoiser == nullptr) {
        default_denoiser.emplace(rest_pose_prior(in.skel, in.n_frames), in.sigma_prior, in.schedule);
        denoiser = &*default_denoiser;
    }

    std::string note;
    for (int attempt = 0; attempt <= max_iters; ++attempt) {
        PlanRequest req{in.text, result.aux,
                        detail::perturb_start(result.aux.road_map, in.start, attempt), in.n_frames,
                        in.fps};
        if (in.llm_planner) {
            if (in.client == nullptr) throw Error("run_with_retry: llm planner needs a client");
            result.guidance = plan_llm(req, in.skel, *in.client, in.model, note);
        } else {
            result.guidance = plan_rule_based(req, in.skel);
        }
        result.motion = sample(*denoiser, in.text, result.guidance, &field, in.schedule, in.skel,
                               in.guidance_cfg, in.seed + static_cast<std::uint64_t>(attempt));
        result.report = check(result.motion, in.scene, result.aux, result.guidance, in.skel,
                              in.thresholds, in.guidance_cfg.samples_per_bone,
                              in.llm_semantics ? in.client : nullptr, in.text, in.model);
        result.replans = attempt;
        if (result.report.passed) break;
        note = detail::failure_note(result.report);
    }
    return result;
}

}  // namespace smg
