#include "dln/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <thread>

#include "dln/dataset.hpp"
#include "dln/rng.hpp"

namespace dln {

namespace {

// A band that never matches; used for steps where no band is defined.
constexpr Band kNoBand{1.0, -1.0, BandKind::weight_decay};

bool is_stochastic(Rule rule) {
    return rule == Rule::noise || rule == Rule::sgd;
}

bool is_flow(Rule rule) {
    return rule == Rule::flow || rule == Rule::flow_wd;
}

bool rule_has_band(Rule rule) {
    return rule == Rule::wd || rule == Rule::flow_wd || rule == Rule::noise ||
           rule == Rule::sgd;
}

void validate(const RunConfig& cfg) {
    if (cfg.init.kind == InitSpec::Kind::explicit_list) {
        if (cfg.init.w0.size() < 2) {
            throw ConfigError("w0", "needs at least 2 entries");
        }
        for (double v : cfg.init.w0) {
            if (v == 0.0 || !std::isfinite(v)) {
                throw ConfigError("w0", "entries must be finite and nonzero");
            }
        }
    } else if (cfg.d < 2) {
        throw ConfigError("d", "needs d >= 2");
    }
    if (cfg.init.kind == InitSpec::Kind::balanced && cfg.init.value == 0.0) {
        throw ConfigError("w0", "balanced init value must be nonzero");
    }
    if (cfg.init.kind == InitSpec::Kind::random && !(cfg.init.scale > 0.0)) {
        throw ConfigError("scale", "random init scale must be > 0");
    }

    if (is_flow(cfg.rule)) {
        if (!(cfg.t_end > 0.0)) {
            throw ConfigError("t_end", "flow rules need t_end > 0");
        }
        if (!(cfg.dt > 0.0) || cfg.dt > cfg.t_end) {
            throw ConfigError("dt", "needs 0 < dt <= t_end");
        }
        if (!(cfg.lambda > 0.0)) {
            throw ConfigError("lambda", "needs lambda > 0");
        }
    } else if (cfg.steps < 1) {
        throw ConfigError("steps", "discrete rules need steps >= 1");
    }

    if (cfg.rule == Rule::gd && !cfg.lr) {
        throw ConfigError("lr", "rule gd needs a fixed lr; use gd-adaptive for the adaptive policy");
    }
    if (cfg.rule == Rule::gd_adaptive && cfg.lr) {
        throw ConfigError("lr", "rule gd-adaptive uses the adaptive rate; drop lr or use rule gd");
    }
    if (cfg.lr && !(*cfg.lr > 0.0)) {
        throw ConfigError("lr", "needs lr > 0");
    }
    if ((cfg.rule == Rule::wd || cfg.rule == Rule::flow_wd) && cfg.mu < 0.0) {
        throw ConfigError("mu", "needs mu >= 0");
    }
    if (cfg.rule == Rule::noise && !(cfg.delta > 0.0 && cfg.delta < 0.5)) {
        throw ConfigError("delta", "rule noise needs delta in (0, 1/2)");
    }
    if (cfg.rule == Rule::sgd) {
        if (cfg.dataset_size < 2) {
            throw ConfigError("N", "rule sgd needs N >= 2");
        }
        if (cfg.batch_size < 1 || cfg.batch_size > cfg.dataset_size) {
            throw ConfigError("B", "rule sgd needs 1 <= B <= N");
        }
        if (!cfg.lr && !(cfg.delta > 0.0 && cfg.delta < 1.0)) {
            throw ConfigError("delta", "adaptive sgd lr needs delta in (0, 1)");
        }
        if (cfg.noise_level < 0.0) {
            throw ConfigError("noise_level", "needs noise_level >= 0");
        }
    }
    const bool needs_seed = is_stochastic(cfg.rule) ||
                            cfg.init.kind == InitSpec::Kind::random;
    if (needs_seed && !cfg.seed) {
        throw ConfigError("seed", "required for stochastic rules and random init");
    }
}

WeightVector resolve_init(const RunConfig& cfg, Philox& rng) {
    switch (cfg.init.kind) {
    case InitSpec::Kind::explicit_list:
        return WeightVector(cfg.init.w0);
    case InitSpec::Kind::balanced:
        return WeightVector::balanced(cfg.d, cfg.init.value);
    case InitSpec::Kind::random: {
        std::vector<double> w(cfg.d);
        for (double& v : w) {
            v = rng.uniform(cfg.init.scale / 3.0, cfg.init.scale);
        }
        // Flip signs in pairs so W stays positive.
        for (std::size_t p = 0; p + 1 < cfg.d; p += 2) {
            if (rng.next_u32() & 1u) {
                w[p] = -w[p];
                w[p + 1] = -w[p + 1];
            }
        }
        return WeightVector(std::move(w));
    }
    }
    throw ConfigError("w0", "unknown init kind");
}

TrajectoryRecord make_record(std::int64_t step, const WeightVector& w, double lr) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.w.assign(w.begin(), w.end());
    rec.W = product(w);
    const double r = rec.W - 1.0;
    rec.loss = r * r;
    rec.imbalance = layer_imbalance(w);
    rec.lr = lr;
    return rec;
}

void annotate_band(TrajectoryRecord& rec, const Band& band) {
    if (band.lo <= band.hi) {
        rec.band_lo = band.lo;
        rec.band_hi = band.hi;
    }
}

Band realized_sgd_band(double eta) {
    return Band{std::min(1.0, 1.0 - eta), std::max(1.0, 1.0 - eta), BandKind::sgd_noise};
}

struct SgdNoiseSource {
    const Dataset* dataset = nullptr;
    Philox rng{0};
};

} // namespace

std::string rule_name(Rule rule) {
    switch (rule) {
    case Rule::flow: return "flow";
    case Rule::flow_wd: return "flow-wd";
    case Rule::gd: return "gd";
    case Rule::gd_adaptive: return "gd-adaptive";
    case Rule::wd: return "wd";
    case Rule::noise: return "noise";
    case Rule::sgd: return "sgd";
    }
    return "?";
}

Rule parse_rule(const std::string& name) {
    if (name == "flow") return Rule::flow;
    if (name == "flow-wd") return Rule::flow_wd;
    if (name == "gd") return Rule::gd;
    if (name == "gd-adaptive") return Rule::gd_adaptive;
    if (name == "wd") return Rule::wd;
    if (name == "noise") return Rule::noise;
    if (name == "sgd") return Rule::sgd;
    throw ConfigError("rule", "unknown rule '" + name + "'");
}

RunResult run_simulation(const RunConfig& config) {
    validate(config);
    const std::uint64_t seed = config.seed.value_or(0);
    Philox master(seed);
    Philox init_rng = master.split(0);
    Philox noise_rng = master.split(1);
    Philox batch_rng = master.split(2);

    WeightVector w = resolve_init(config, init_rng);

    RunResult result;
    std::vector<Band> bands;

    if (is_flow(config.rule)) {
        FlowSpec spec;
        spec.variant = config.rule == Rule::flow ? FlowVariant::plain : FlowVariant::weight_decay;
        spec.mu = config.mu;
        spec.lambda = config.lambda;
        spec.t_end = config.t_end;
        spec.dt = config.dt;
        FlowResult flow = integrate_flow(w, spec);
        result.singularity = flow.singularity;
        result.records.reserve(flow.states.size());
        for (std::size_t s = 0; s < flow.states.size(); ++s) {
            TrajectoryRecord rec = make_record(static_cast<std::int64_t>(s),
                                               flow.states[s].w, config.lambda);
            rec.t = flow.states[s].t;
            Band band = kNoBand;
            if (config.rule == Rule::flow_wd && rec.W > 0.0) {
                band = wd_band(flow.states[s].w, config.mu);
                annotate_band(rec, band);
            }
            bands.push_back(band);
            result.records.push_back(std::move(rec));
        }
    } else {
        std::optional<Dataset> dataset;
        if (config.rule == Rule::sgd) {
            dataset = Dataset::generate_normalized(config.dataset_size,
                                                   config.noise_level, seed);
        }
        result.records.reserve(config.steps + 1);
        for (std::size_t s = 0; s <= config.steps; ++s) {
            const double lr = config.lr ? *config.lr : [&] {
                switch (config.rule) {
                case Rule::gd_adaptive:
                case Rule::wd: return adaptive_lr_gd(w);
                case Rule::noise: return adaptive_lr_noise(w);
                case Rule::sgd: return adaptive_lr_sgd(w, config.delta);
                default: return adaptive_lr_gd(w);
                }
            }();
            TrajectoryRecord rec = make_record(static_cast<std::int64_t>(s), w, lr);

            std::optional<double> eta;
            if (s < config.steps) {
                if (config.rule == Rule::noise) {
                    eta = noise_rng.uniform(-config.delta, config.delta);
                } else if (config.rule == Rule::sgd) {
                    const Batch batch = sample_batch(*dataset, config.batch_size, batch_rng);
                    eta = noise_decomposition(*dataset, batch).combined(rec.W);
                }
            }
            rec.eta = eta;

            Band band = kNoBand;
            if (config.rule == Rule::wd && rec.W > 0.0) {
                band = wd_band(w, config.mu);
            } else if (config.rule == Rule::noise) {
                band = noise_band(config.delta);
            } else if (config.rule == Rule::sgd && eta) {
                band = realized_sgd_band(*eta);
            }
            annotate_band(rec, band);
            bands.push_back(band);
            result.records.push_back(std::move(rec));

            if (s == config.steps) {
                break;
            }
            StepOutcome outcome = [&] {
                switch (config.rule) {
                case Rule::gd:
                case Rule::gd_adaptive: return gd_step(w, lr);
                case Rule::wd: return gd_step_weight_decay(w, lr, config.mu);
                case Rule::noise: return gd_step_noise(w, lr, *eta);
                case Rule::sgd: return sgd_step(w, lr, *eta);
                default: throw Error("unreachable");
                }
            }();
            w = std::move(outcome.w_next);

            bool singular = false;
            for (double v : w) {
                if (!std::isfinite(v) || std::abs(v) < 1e-9) {
                    singular = true;
                }
            }
            if (singular) {
                result.records.push_back(make_record(static_cast<std::int64_t>(s) + 1, w, lr));
                bands.push_back(kNoBand);
                result.singularity = true;
                break;
            }
        }
    }

    if (rule_has_band(config.rule)) {
        const PhaseDecomposition phases = detect_phases(result.records, bands);
        for (std::size_t s = 0; s < result.records.size(); ++s) {
            result.records[s].phase = phases.phases[s];
        }
        if (phases.entry_step < result.records.size()) {
            result.phase_entry_step = phases.entry_step;
        }
    }
    return result;
}

ManifestEntry make_manifest_entry(const RunConfig& config, const RunResult& result,
                                  const std::string& run_id, const std::string& csv_name) {
    ManifestEntry e;
    e.run_id = run_id;
    e.rule = rule_name(config.rule);
    e.d = result.records.empty() ? config.d : result.records.front().w.size();
    e.seed = config.seed.value_or(0);
    if (config.lr) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), *config.lr);
        e.lr_policy = std::string(buf, res.ptr);
    } else if (is_flow(config.rule)) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), config.lambda);
        e.lr_policy = std::string(buf, res.ptr);
    } else {
        e.lr_policy = "adaptive";
    }
    if (config.rule == Rule::wd || config.rule == Rule::flow_wd) {
        e.mu = config.mu;
    }
    if (config.rule == Rule::noise || config.rule == Rule::sgd) {
        e.delta = config.delta;
    }
    if (config.rule == Rule::sgd) {
        e.batch_size = config.batch_size;
        e.dataset_size = config.dataset_size;
    }
    e.steps = result.records.empty() ? 0 : result.records.size() - 1;
    e.path = csv_name;
    return e;
}

namespace {

void print_summary(std::ostream& os, const std::string& run_id, const RunConfig& cfg,
                   const RunResult& result, const std::filesystem::path& csv) {
    const TrajectoryRecord& last = result.records.back();
    os << run_id << " rule=" << rule_name(cfg.rule) << " d=" << last.w.size()
       << " steps=" << result.records.size() - 1 << " final_loss=" << last.loss
       << " final_imbalance=" << last.imbalance
       << (result.singularity ? " singularity=1" : "") << " out=" << csv.string() << '\n';
}

} // namespace

int cmd_simulate(const RunConfig& config, const std::string& run_id) {
    if (config.out.empty()) {
        throw ConfigError("out", "output directory required");
    }
    RunResult result = run_simulation(config);
    const std::filesystem::path dir(config.out);
    std::filesystem::create_directories(dir);
    const std::string csv_name = run_id + ".csv";
    const std::filesystem::path csv = dir / csv_name;
    write_trajectory_csv(result.records, csv);
    const ManifestEntry entry = make_manifest_entry(config, result, run_id, csv_name);
    write_manifest(std::span(&entry, 1), dir / "manifest.json");
    print_summary(std::cout, run_id, config, result, csv);
    return result.singularity ? 2 : 0;
}

namespace {

std::size_t worker_count(std::size_t runs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DLN_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && parsed > 0) {
            n = static_cast<std::size_t>(parsed);
        }
    }
    return std::min(n, runs);
}

std::size_t to_count(double value, const std::string& axis) {
    if (!(value >= 0.0) || std::abs(value - std::round(value)) > 1e-9) {
        throw ConfigError(axis, "needs a nonnegative integer value");
    }
    return static_cast<std::size_t>(std::llround(value));
}

void apply_axis(RunConfig& cfg, const std::string& axis, double value) {
    if (axis == "mu") cfg.mu = value;
    else if (axis == "delta") cfg.delta = value;
    else if (axis == "lr") cfg.lr = value;
    else if (axis == "lambda") cfg.lambda = value;
    else if (axis == "noise_level") cfg.noise_level = value;
    else if (axis == "steps") cfg.steps = to_count(value, axis);
    else if (axis == "t_end") cfg.t_end = value;
    else if (axis == "dt") cfg.dt = value;
    else if (axis == "B") cfg.batch_size = to_count(value, axis);
    else if (axis == "N") cfg.dataset_size = to_count(value, axis);
    else if (axis == "d") cfg.d = to_count(value, axis);
    else if (axis == "seed") cfg.seed = static_cast<std::uint64_t>(to_count(value, axis));
    else throw ConfigError("axis", "unknown sweep axis '" + axis + "'");
}

std::string run_label(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%03zu", index);
    return buf;
}

} // namespace

int cmd_sweep(const RunConfig& base, const std::string& axis,
              const std::vector<double>& values) {
    if (base.out.empty()) {
        throw ConfigError("out", "output directory required");
    }
    if (values.empty()) {
        throw ConfigError("values", "sweep needs at least one value");
    }
    const std::uint64_t master_seed = base.seed.value_or(0);
    const std::size_t n = values.size();

    struct Slot {
        RunConfig cfg;
        RunResult result;
        ManifestEntry entry;
        std::exception_ptr error;
        bool singularity = false;
    };
    std::vector<Slot> slots(n);
    for (std::size_t i = 0; i < n; ++i) {
        slots[i].cfg = base;
        apply_axis(slots[i].cfg, axis, values[i]);
        if (axis != "seed") {
            slots[i].cfg.seed = derive_run_seed(master_seed, i);
        }
    }

    const std::filesystem::path dir(base.out);
    std::filesystem::create_directories(dir);

    const std::size_t workers = worker_count(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&slots, &dir, t, workers, n] {
            for (std::size_t i = t; i < n; i += workers) {
                try {
                    slots[i].result = run_simulation(slots[i].cfg);
                    const std::string id = run_label(i);
                    write_trajectory_csv(slots[i].result.records, dir / (id + ".csv"));
                    slots[i].entry = make_manifest_entry(slots[i].cfg, slots[i].result,
                                                         id, id + ".csv");
                    slots[i].singularity = slots[i].result.singularity;
                } catch (...) {
                    slots[i].error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }

    for (const Slot& slot : slots) {
        if (slot.error) {
            std::rethrow_exception(slot.error);
        }
    }
    std::vector<ManifestEntry> entries;
    entries.reserve(n);
    bool any_singularity = false;
    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back(slots[i].entry);
        any_singularity = any_singularity || slots[i].singularity;
        print_summary(std::cout, run_label(i), slots[i].cfg, slots[i].result,
                      dir / (run_label(i) + ".csv"));
    }
    write_manifest(entries, dir / "manifest.json");
    return any_singularity ? 2 : 0;
}

} // namespace dln
