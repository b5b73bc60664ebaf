#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dln/analysis.hpp"
#include "dln/trajectory.hpp"

namespace dln {

enum class Rule {
    flow,        // continuous GD (RK4)
    flow_wd,     // continuous GD with weight decay (RK4)
    gd,          // discrete GD, fixed lr
    gd_adaptive, // discrete GD, Theorem-1 adaptive lr
    wd,          // discrete GD with weight decay
    noise,       // discrete GD with noise augmentation
    sgd,         // discrete mini-batch SGD
};

std::string rule_name(Rule rule);
Rule parse_rule(const std::string& name); // throws ConfigError

struct InitSpec {
    enum class Kind { explicit_list, balanced, random };
    Kind kind = Kind::random;
    std::vector<double> w0;  // explicit_list
    double value = 1.0;      // balanced
    double scale = 1.5;      // random: entries uniform in [scale/3, scale],
                             // signs flipped in pairs so W > 0
};

struct RunConfig {
    Rule rule = Rule::gd_adaptive;
    std::size_t d = 2;
    InitSpec init;
    std::size_t steps = 100;        // discrete rules
    double t_end = 10.0;            // flow rules
    double dt = 1e-3;               // flow rules
    double lambda = 1.0;            // flow speed
    std::optional<double> lr;       // fixed lr; nullopt = rule-appropriate adaptive
    double mu = 0.0;                // wd / flow_wd
    double delta = 0.0;             // noise / sgd
    double noise_level = 0.0;       // sgd dataset label noise
    std::size_t batch_size = 0;     // sgd: B
    std::size_t dataset_size = 0;   // sgd: N
    std::optional<std::uint64_t> seed;
    std::string out;                // output directory
};

struct RunResult {
    std::vector<TrajectoryRecord> records;
    bool singularity = false;
    std::optional<std::size_t> phase_entry_step;
};

/// Validates the config (throws ConfigError naming the field) and runs
/// the trajectory in memory, with band/phase annotations where the rule
/// defines a band (wd, flow_wd, noise; sgd uses the realized per-step
/// interval between 1 and 1 - eta).
RunResult run_simulation(const RunConfig& config);

ManifestEntry make_manifest_entry(const RunConfig& config, const RunResult& result,
                                  const std::string& run_id, const std::string& csv_name);

/// Runs, writes <out>/<run_id>.csv and <out>/manifest.json.
/// Exit code 0; 2 on SingularityReached (partial CSV still written).
int cmd_simulate(const RunConfig& config, const std::string& run_id = "run_000");

/// One run per axis value; runs execute in parallel (worker count capped
/// by DLN_THREADS) with per-run seeds derived from (seed, run index).
/// Axis is one of: mu, delta, lr, lambda, noise_level, steps, t_end, dt,
/// B, N, d, seed.
int cmd_sweep(const RunConfig& base, const std::string& axis,
              const std::vector<double>& values);

} // namespace dln
