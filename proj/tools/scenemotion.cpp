// Command-line front end: compile scenes into spatial auxiliaries, run the
// full text-to-motion pipeline, and evaluate generated motions.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smg/checker.hpp"
#include "smg/config.hpp"
#include "smg/llm_http.hpp"
#include "smg/metrics.hpp"
#include "smg/motion_io.hpp"
#include "smg/planner.hpp"
#include "smg/scene_compiler.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes (also documented in the README):
//   0 success            5 unreachable target
//   2 no matching target 6 unknown action keyword
//   3 I/O error          7 LLM transport failure
//   4 final check failed 8 LLM reply parse/bounds error
//                        9 config or usage error
constexpr int kExitCheckFailed = 4;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const smg::NoMatch*>(&e)) return 2;
    if (dynamic_cast<const smg::IoError*>(&e)) return 3;
    if (dynamic_cast<const smg::Unreachable*>(&e)) return 5;
    if (dynamic_cast<const smg::UnknownAction*>(&e)) return 6;
    if (dynamic_cast<const smg::LlmFailure*>(&e)) return 7;
    if (dynamic_cast<const smg::ParseFailure*>(&e)) return 8;
    if (dynamic_cast<const smg::BoundsViolation*>(&e)) return 8;
    return 9;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    fs::path out = p;
    out.replace_extension();
    out += suffix;
    return out;
}

// LLM client selection: a transcript replay file (SMG_LLM_TRANSCRIPT) wins,
// otherwise the HTTP client from SMG_LLM_ENDPOINT / SMG_LLM_API_KEY.
// SMG_LLM_RECORD=path wraps the client and saves a transcript on success.
struct LlmStack {
    std::unique_ptr<smg::LlmClient> transport;
    std::unique_ptr<smg::TranscriptRecorder> recorder;
    std::string record_path;

    smg::LlmClient* client() {
        if (recorder) return recorder.get();
        return transport.get();
    }
    void save_transcript() const {
        if (recorder && !record_path.empty()) {
            smg::write_text_atomic(record_path, recorder->transcript().dump(2) + "\n");
        }
    }
};

LlmStack make_llm_stack(const smg::Config& cfg) {
    LlmStack stack;
    if (const char* replay = std::getenv("SMG_LLM_TRANSCRIPT")) {
        stack.transport =
            std::make_unique<smg::TranscriptReplayClient>(smg::read_json_file(replay));
    } else {
        auto http = smg::HttpLlmConfig::from_env();
        http.timeout_seconds = cfg.timeout;
        stack.transport = std::make_unique<smg::HttpLlmClient>(std::move(http));
    }
    if (const char* record = std::getenv("SMG_LLM_RECORD")) {
        stack.recorder = std::make_unique<smg::TranscriptRecorder>(*stack.transport);
        stack.record_path = record;
    }
    return stack;
}

smg::SkeletonDef load_skeleton_or_default(const std::string& path) {
    return path.empty() ? smg::default_skeleton() : smg::load_skeleton(path);
}

int cmd_compile(const std::string& scene_path, const std::string& query,
                const std::string& out_path, double cell, const std::string& locator_kind,
                bool ascii, const smg::Config& cfg) {
    const smg::Scene scene = smg::load_scene(scene_path);
    smg::TargetLocator locator;
    LlmStack stack;
    if (locator_kind == "llm") {
        stack = make_llm_stack(cfg);
        locator.client = stack.client();
        locator.model = cfg.model;
    }
    const smg::SpatialAuxiliary aux = smg::compile(scene, query, locator, cell);
    smg::write_text_atomic(out_path, smg::aux_to_json(aux).dump(2) + "\n");
    if (ascii) {
        smg::write_text_atomic(with_suffix(out_path, ".roadmap.txt").string(),
                               smg::roadmap_ascii(aux.road_map));
    }
    stack.save_transcript();
    std::cout << "wrote " << out_path << " (target id " << aux.target_id << ")\n";
    return 0;
}

int cmd_run(const std::string& scene_path, const std::string& text, const std::string& out_path,
            const smg::Config& cfg, const std::string& skeleton_path) {
    smg::PipelineInputs in;
    in.scene = smg::load_scene(scene_path);
    in.text = text;
    in.start = {cfg.start_x, cfg.start_y};
    in.n_frames = cfg.frames;
    in.fps = cfg.fps;
    in.cell = cfg.cell;
    in.skel = load_skeleton_or_default(skeleton_path);
    in.schedule = cfg.schedule();
    in.guidance_cfg = cfg.guidance();
    in.thresholds = cfg.thresholds;
    in.seed = cfg.seed;
    in.sigma_prior = cfg.sigma_prior;
    in.llm_planner = cfg.planner_kind == "llm";
    in.llm_locator = cfg.locator_kind == "llm";
    in.llm_semantics = cfg.semantics;
    in.model = cfg.model;

    std::optional<smg::MlpDenoiser> mlp;
    if (!cfg.denoiser_weights.empty()) {
        mlp.emplace(smg::MlpDenoiser::from_json(smg::read_json_file(cfg.denoiser_weights),
                                                in.schedule));
        in.denoiser = &*mlp;
    }

    LlmStack stack;
    if (in.llm_planner || in.llm_locator || in.llm_semantics) {
        stack = make_llm_stack(cfg);
        in.client = stack.client();
    }

    const smg::PipelineResult result = smg::run_with_retry(in, cfg.max_iters);

    const nlohmann::json motion_doc =
        smg::motion_to_json(result.motion, in.skel.name, result.aux.target_id);
    smg::write_text_atomic(out_path, motion_doc.dump(2) + "\n");
    smg::write_text_atomic(with_suffix(out_path, ".positions.csv").string(),
                           smg::positions_csv(result.motion, in.skel));
    nlohmann::json report_doc = smg::report_to_json(result.report);
    report_doc["replans"] = result.replans;
    smg::write_text_atomic(with_suffix(out_path, ".report.json").string(),
                           report_doc.dump(2) + "\n");
    stack.save_transcript();

    std::cout << (result.report.passed ? "passed" : "FAILED") << " after " << result.replans
              << " re-plan(s); wrote " << out_path << "\n";
    return result.report.passed ? 0 : kExitCheckFailed;
}

int cmd_eval(const std::string& motions_dir, const std::string& scene_path,
             const std::string& out_path, std::optional<int> target_override,
             const std::string& skeleton_path, int samples_per_bone) {
    const smg::Scene scene = smg::load_scene(scene_path);
    const smg::SceneField field = smg::scene_field(scene);
    const smg::SkeletonDef skel = load_skeleton_or_default(skeleton_path);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(motions_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        const std::string name = entry.path().filename().string();
        if (name.size() > 12 && name.ends_with(".report.json")) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream csv;
    csv << "motion,body_to_goal,non_collision,contact\n";
    double sum_goal = 0.0, sum_nc = 0.0;
    int contacts = 0, evaluated = 0;

    for (const auto& file : files) {
        try {
            const nlohmann::json doc = smg::read_json_file(file.string());
            const smg::MotionSequence motion = smg::motion_from_json(doc);
            std::optional<int> target_id = target_override;
            if (!target_id && doc.contains("target_id")) target_id = doc["target_id"].get<int>();
            if (!target_id) throw smg::Error("no target id in file and no --target given");
            const smg::SceneObject* target = scene.find(*target_id);
            if (target == nullptr) throw smg::Error("target id not in scene");

            const smg::EvalResult r =
                smg::evaluate_motion(motion, field, target->box, skel, samples_per_bone);
            rows.push_back({{"motion", file.filename().string()},
                            {"body_to_goal", r.body_to_goal},
                            {"non_collision", r.non_collision},
                            {"contact", r.contact}});
            csv << file.filename().string() << ',' << r.body_to_goal << ',' << r.non_collision
                << ',' << (r.contact ? 1 : 0) << '\n';
            sum_goal += r.body_to_goal;
            sum_nc += r.non_collision;
            contacts += r.contact;
            ++evaluated;
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << file << ": " << e.what() << "\n";
        }
    }
    if (evaluated == 0) {
        std::cerr << "error: no evaluable motion files in " << motions_dir << "\n";
        return 3;
    }

    const nlohmann::json aggregate = {{"motions", evaluated},
                                      {"body_to_goal_mean", sum_goal / evaluated},
                                      {"non_collision_mean", sum_nc / evaluated},
                                      {"contact_fraction", static_cast<double>(contacts) / evaluated}};
    csv << "aggregate," << sum_goal / evaluated << ',' << sum_nc / evaluated << ','
        << static_cast<double>(contacts) / evaluated << '\n';

    smg::write_text_atomic(out_path, nlohmann::json{{"motions", rows}, {"aggregate", aggregate}}.dump(2) + "\n");
    smg::write_text_atomic(with_suffix(out_path, ".csv").string(), csv.str());
    std::cout << "evaluated " << evaluated << " motion(s); wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene-aware text-to-motion toolkit"};
    app.require_subcommand(1);

    std::string scene_path, out_path, query, text, config_path, skeleton_path, motions_dir;
    std::string locator_kind = "rule";
    double cell = smg::kDefaultCellSize;
    bool ascii = false;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> target_override;

    auto* compile = app.add_subcommand("compile", "Compile a scene + query into a spatial auxiliary");
    compile->add_option("--scene", scene_path, "Scene JSON file")->required();
    compile->add_option("--query", query, "Target query text")->required();
    compile->add_option("--out", out_path, "Output auxiliary JSON path")->required();
    compile->add_option("--cell", cell, "Grid cell size in meters");
    compile->add_option("--locator", locator_kind, "Target locator: rule or llm")
        ->check(CLI::IsMember({"rule", "llm"}));
    compile->add_flag("--ascii", ascii, "Also write the road map as ASCII");
    compile->add_option("--config", config_path, "Config file (for LLM settings)");

    auto* run = app.add_subcommand("run", "Full pipeline: compile, plan, sample, check");
    run->add_option("--scene", scene_path, "Scene JSON file")->required();
    run->add_option("--text", text, "Motion instruction")->required();
    run->add_option("--out", out_path, "Output motion JSON path")->required();
    run->add_option("--config", config_path, "Config file");
    run->add_option("--seed", seed_override, "Sampler seed override");
    run->add_option("--skeleton", skeleton_path, "Skeleton JSON (default: built-in humanoid)");

    auto* eval = app.add_subcommand("eval", "Evaluate a directory of motion files against a scene");
    eval->add_option("--motions", motions_dir, "Directory of motion JSON files")->required();
    eval->add_option("--scene", scene_path, "Scene JSON file")->required();
    eval->add_option("--out", out_path, "Output report JSON path")->required();
    eval->add_option("--target", target_override, "Target object id override");
    eval->add_option("--skeleton", skeleton_path, "Skeleton JSON (default: built-in humanoid)");

    CLI11_PARSE(app, argc, argv);

    try {
        smg::Config cfg = config_path.empty() ? smg::Config{} : smg::load_config(config_path);
        if (const char* model = std::getenv("SMG_LLM_MODEL")) cfg.model = model;
        if (seed_override) cfg.seed = *seed_override;

        if (compile->parsed()) return cmd_compile(scene_path, query, out_path, cell, locator_kind, ascii, cfg);
        if (run->parsed()) return cmd_run(scene_path, text, out_path, cfg, skeleton_path);
        if (eval->parsed()) {
            return cmd_eval(motions_dir, scene_path, out_path, target_override, skeleton_path,
                            cfg.samples_per_bone);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 9;
}
