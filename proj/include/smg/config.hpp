#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "smg/checker.hpp"
#include "smg/diffusion.hpp"
#include "smg/errors.hpp"

// Run configuration: a TOML-style key/value file with [section] headers.
// Unknown keys are rejected so typos fail loudly. See the README for the
// full schema and defaults.

namespace smg {

struct Config {
    // [schedule]
    int schedule_steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.1;
    // [guidance]
    double lambda = 2.0;
    double eta = 0.5;
    int samples_per_bone = 2;
    // [compiler]
    double cell = kDefaultCellSize;
    // [planner]
    std::string planner_kind = "rule";  // "rule" or "llm"
    int frames = 120;
    double fps = 20.0;
    double start_x = 0.0;
    double start_y = 0.0;
    // [checker]
    CheckThresholds thresholds;
    int max_iters = 1;
    bool semantics = false;
    // [sampler]
    std::uint64_t seed = 7;
    double sigma_prior = 0.5;
    std::string denoiser_weights;  // optional MLP weights JSON
    // [locator]
    std::string locator_kind = "rule";  // "rule" or "llm"
    // [llm]
    std::string model = "gpt-4";
    int retries = 2;
    double timeout = 30.0;

    void validate() const {
        if (schedule_steps < 1) throw ConfigError("schedule.steps must be >= 1");
        if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_end < beta_start) {
            throw ConfigError("schedule betas must satisfy 0 < beta_start <= beta_end < 1");
        }
        if (lambda < 0.0 || eta < 0.0) throw ConfigError("guidance strengths must be >= 0");
        if (samples_per_bone < 2) throw ConfigError("guidance.samples_per_bone must be >= 2");
        if (!(cell > 0.0)) throw ConfigError("compiler.cell must be positive");
        if (planner_kind != "rule" && planner_kind != "llm") {
            throw ConfigError("planner.kind must be 'rule' or 'llm'");
        }
        if (locator_kind != "rule" && locator_kind != "llm") {
            throw ConfigError("locator.kind must be 'rule' or 'llm'");
        }
        if (frames < 1 || !(fps > 0.0)) throw ConfigError("planner.frames/fps must be positive");
        if (max_iters < 0) throw ConfigError("checker.max_iters must be >= 0");
        if (!(sigma_prior > 0.0)) throw ConfigError("sampler.sigma_prior must be positive");
        if (retries < 0) throw ConfigError("llm.retries must be >= 0");
    }

    DiffusionSchedule schedule() const {
        return DiffusionSchedule::linear_beta(schedule_steps, beta_start, beta_end);
    }
    GuidanceConfig guidance() const { return {lambda, eta, samples_per_bone}; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> parse_toml_subset(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (!section.empty()) key = section + "." + key;
        if (kv.count(key) != 0) throw ConfigError("config: duplicate key " + key);
        kv[key] = value;
    }
    return kv;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " is not a number: " + v);
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " is not an integer: " + v);
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: " + key + " is not a boolean: " + v);
}

}  // namespace detail

inline Config parse_config(const std::string& text) {
    Config c;
    for (const auto& [key, value] : detail::parse_toml_subset(text)) {
        if (key == "schedule.steps") c.schedule_steps = static_cast<int>(detail::to_int(key, value));
        else if (key == "schedule.beta_start") c.beta_start = detail::to_double(key, value);
        else if (key == "schedule.beta_end") c.beta_end = detail::to_double(key, value);
        else if (key == "guidance.lambda") c.lambda = detail::to_double(key, value);
        else if (key == "guidance.eta") c.eta = detail::to_double(key, value);
        else if (key == "guidance.samples_per_bone") c.samples_per_bone = static_cast<int>(detail::to_int(key, value));
        else if (key == "compiler.cell") c.cell = detail::to_double(key, value);
        else if (key == "planner.kind") c.planner_kind = value;
        else if (key == "planner.frames") c.frames = static_cast<int>(detail::to_int(key, value));
        else if (key == "planner.fps") c.fps = detail::to_double(key, value);
        else if (key == "planner.start_x") c.start_x = detail::to_double(key, value);
        else if (key == "planner.start_y") c.start_y = detail::to_double(key, value);
        else if (key == "checker.non_collision_min") c.thresholds.non_collision_min = detail::to_double(key, value);
        else if (key == "checker.goal_max") c.thresholds.goal_max = detail::to_double(key, value);
        else if (key == "checker.guidance_rmse_max") c.thresholds.guidance_rmse_max = detail::to_double(key, value);
        else if (key == "checker.bounds_inflation") c.thresholds.bounds_inflation = detail::to_double(key, value);
        else if (key == "checker.max_iters") c.max_iters = static_cast<int>(detail::to_int(key, value));
        else if (key == "checker.semantics") c.semantics = detail::to_bool(key, value);
        else if (key == "sampler.seed") c.seed = static_cast<std::uint64_t>(detail::to_int(key, value));
        else if (key == "sampler.sigma_prior") c.sigma_prior = detail::to_double(key, value);
        else if (key == "sampler.denoiser_weights") c.denoiser_weights = value;
        else if (key == "locator.kind") c.locator_kind = value;
        else if (key == "llm.model") c.model = value;
        else if (key == "llm.retries") c.retries = static_cast<int>(detail::to_int(key, value));
        else if (key == "llm.timeout") c.timeout = detail::to_double(key, value);
        else throw ConfigError("config: unknown key " + key);
    }
    c.validate();
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

}  // namespace smg
