#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dln/simulate.hpp"
#include "dln/verify.hpp"

namespace {

// Flag state shared by `simulate` and `sweep`.
struct CliRun {
    std::string rule = "gd-adaptive";
    std::size_t d = 2;
    std::vector<double> w0;
    std::string init; // "balanced:<c>" or "random"
    double scale = 1.5;
    std::size_t steps = 100;
    double t_end = 10.0;
    double dt = 1e-3;
    double lambda = 1.0;
    std::string lr = "adaptive";
    double mu = 0.0;
    double delta = 0.0;
    double noise_level = 0.0;
    std::size_t batch_size = 0;
    std::size_t dataset_size = 0;
    std::int64_t seed = -1; // -1 = unset
    std::string out;
};

void apply_json_config(const std::string& path, CliRun& run) {
    std::ifstream in(path);
    if (!in) {
        throw dln::ConfigError("config", "cannot open " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw dln::ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) {
            slot = j.at(key).get<std::remove_reference_t<decltype(slot)>>();
        }
    };
    get("rule", run.rule);
    get("d", run.d);
    get("w0", run.w0);
    get("init", run.init);
    get("scale", run.scale);
    get("steps", run.steps);
    get("t_end", run.t_end);
    get("dt", run.dt);
    get("lambda", run.lambda);
    if (j.contains("lr")) {
        if (j.at("lr").is_string()) {
            run.lr = j.at("lr").get<std::string>();
        } else {
            run.lr = std::to_string(j.at("lr").get<double>());
        }
    }
    get("mu", run.mu);
    get("delta", run.delta);
    get("noise_level", run.noise_level);
    get("B", run.batch_size);
    get("N", run.dataset_size);
    if (j.contains("seed")) {
        run.seed = j.at("seed").get<std::int64_t>();
    }
    get("out", run.out);
}

dln::RunConfig to_run_config(const CliRun& run) {
    dln::RunConfig cfg;
    cfg.rule = dln::parse_rule(run.rule);
    cfg.d = run.d;
    if (!run.w0.empty()) {
        cfg.init.kind = dln::InitSpec::Kind::explicit_list;
        cfg.init.w0 = run.w0;
        cfg.d = run.w0.size();
    } else if (run.init.rfind("balanced:", 0) == 0) {
        cfg.init.kind = dln::InitSpec::Kind::balanced;
        try {
            cfg.init.value = std::stod(run.init.substr(9));
        } catch (...) {
            throw dln::ConfigError("init", "expected balanced:<value>");
        }
    } else if (run.init.empty() || run.init == "random") {
        cfg.init.kind = dln::InitSpec::Kind::random;
        cfg.init.scale = run.scale;
    } else {
        throw dln::ConfigError("init", "unknown init spec '" + run.init + "'");
    }
    cfg.steps = run.steps;
    cfg.t_end = run.t_end;
    cfg.dt = run.dt;
    cfg.lambda = run.lambda;
    if (run.lr != "adaptive") {
        try {
            cfg.lr = std::stod(run.lr);
        } catch (...) {
            throw dln::ConfigError("lr", "expected a number or 'adaptive'");
        }
    }
    cfg.mu = run.mu;
    cfg.delta = run.delta;
    cfg.noise_level = run.noise_level;
    cfg.batch_size = run.batch_size;
    cfg.dataset_size = run.dataset_size;
    if (run.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(run.seed);
    }
    cfg.out = run.out;
    return cfg;
}

void add_run_flags(CLI::App* cmd, CliRun& run) {
    cmd->add_option("--rule", run.rule,
                    "flow | flow-wd | gd | gd-adaptive | wd | noise | sgd");
    cmd->add_option("--d", run.d, "number of layers");
    cmd->add_option("--w0", run.w0, "explicit start, comma separated")->delimiter(',');
    cmd->add_option("--init", run.init, "balanced:<c> or random (default)");
    cmd->add_option("--scale", run.scale, "random init scale");
    cmd->add_option("--steps", run.steps, "step budget (discrete rules)");
    cmd->add_option("--t-end", run.t_end, "integration horizon (flow rules)");
    cmd->add_option("--dt", run.dt, "integrator step (flow rules)");
    cmd->add_option("--lambda", run.lambda, "flow speed");
    cmd->add_option("--lr", run.lr, "fixed learning rate or 'adaptive'");
    cmd->add_option("--mu", run.mu, "weight decay coefficient");
    cmd->add_option("--delta", run.delta, "noise bound / sgd delta");
    cmd->add_option("--noise-level", run.noise_level, "dataset label noise");
    cmd->add_option("--B", run.batch_size, "sgd batch size");
    cmd->add_option("--N", run.dataset_size, "sgd dataset size");
    cmd->add_option("--seed", run.seed, "rng seed");
    cmd->add_option("--out", run.out, "output directory");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalar deep linear network training dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    CliRun run;
    CLI::App* simulate = app.add_subcommand("simulate", "run one trajectory");
    add_run_flags(simulate, run);

    CLI::App* sweep = app.add_subcommand("sweep", "one trajectory per axis value");
    add_run_flags(sweep, run);
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--axis", axis, "config field to vary")->required();
    sweep->add_option("--values", values, "axis values, comma separated")
        ->delimiter(',')
        ->required();

    CLI::App* verify = app.add_subcommand("verify", "run a property suite");
    std::string suite;
    std::size_t trials = 10000;
    std::size_t v_steps = 100;
    std::size_t v_dataset = 64;
    std::int64_t v_seed = 1;
    verify->add_option("suite", suite,
                       "thm1 | thm2 | thm3 | thm4 | bands | conservation | divergence | sgd-variance")
        ->required();
    verify->add_option("--trials", trials, "samples / runs / batches per configuration");
    verify->add_option("--steps", v_steps, "steps per run (thm3/thm4)");
    verify->add_option("--N", v_dataset, "dataset size (sgd-variance)");
    verify->add_option("--seed", v_seed, "rng seed");

    // --config provides defaults; explicit flags override them, so load it
    // before the real parse.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            config_path = argv[i + 1];
        }
    }

    try {
        if (!config_path.empty()) {
            apply_json_config(config_path, run);
        }
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const dln::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (simulate->parsed()) {
            return dln::cmd_simulate(to_run_config(run));
        }
        if (sweep->parsed()) {
            return dln::cmd_sweep(to_run_config(run), axis, values);
        }
        // verify
        const auto seed = static_cast<std::uint64_t>(v_seed);
        dln::SuiteResult result;
        if (suite == "thm1") {
            result = dln::verify_thm1(trials, seed);
        } else if (suite == "thm2") {
            result = dln::verify_thm2(trials, seed);
        } else if (suite == "thm3") {
            result = dln::verify_thm3(trials == 10000 ? 1000 : trials, v_steps, seed);
        } else if (suite == "thm4") {
            result = dln::verify_thm4(trials == 10000 ? 1000 : trials, v_steps, seed);
        } else if (suite == "bands") {
            result = dln::verify_bands(seed);
        } else if (suite == "conservation") {
            result = dln::verify_conservation(trials == 10000 ? 100 : trials, seed);
        } else if (suite == "divergence") {
            result = dln::verify_divergence(trials == 10000 ? 20 : trials);
        } else if (suite == "sgd-variance") {
            result = dln::verify_sgd_variance(v_dataset, trials == 10000 ? 100000 : trials, seed);
        } else {
            std::cerr << "error: unknown verify suite '" << suite << "'\n";
            return 1;
        }
        std::cout << result.summary() << '\n';
        return result.pass() ? 0 : 3;
    } catch (const dln::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const dln::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
