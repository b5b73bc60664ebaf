#include "dln/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "dln/analysis.hpp"
#include "dln/dataset.hpp"
#include "dln/dynamics.hpp"
#include "dln/rng.hpp"
#include "dln/simulate.hpp"
#include "dln/weights.hpp"

namespace dln {

namespace {

constexpr double kRatioSlack = 1e-12; // rounding slack on empirical ratios

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

std::string format_g(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Random w with d entries, product steered to `target`, magnitudes kept
// inside [lo_mag, hi_mag]; signs flipped in pairs so the product keeps the
// target's sign.
WeightVector sample_with_product(Philox& rng, std::size_t d, double target,
                                 double lo_mag, double hi_mag) {
    for (int attempt = 0; attempt < 256; ++attempt) {
        std::vector<double> w(d);
        double partial = 1.0;
        for (std::size_t i = 0; i + 1 < d; ++i) {
            // log-uniform magnitude, symmetric around 1
            w[i] = std::exp(rng.uniform(-0.43, 0.43));
            partial *= w[i];
        }
        w[d - 1] = target / partial;
        if (std::abs(w[d - 1]) < lo_mag || std::abs(w[d - 1]) > hi_mag) {
            continue;
        }
        for (std::size_t p = 0; p + 1 < d; p += 2) {
            if (rng.next_u32() & 1u) {
                w[p] = -w[p];
                w[p + 1] = -w[p + 1];
            }
        }
        return WeightVector(std::move(w));
    }
    throw Error("weight sampling failed to hit the magnitude window");
}

void note_violation(SuiteResult& r, const std::string& what) {
    ++r.violations;
    if (r.notes.size() < 8) {
        r.notes.push_back(what);
    }
}

} // namespace

std::string SuiteResult::summary() const {
    std::ostringstream os;
    os << (pass() ? "PASS" : "FAIL") << ' ' << name << ": " << checks << " checks, "
       << violations << " violations";
    if (worst_low != 0.0 || worst_high != 0.0) {
        os << ", factors in [" << format_g(worst_low) << ", " << format_g(worst_high) << ']';
    }
    os << " (" << format_g(elapsed_seconds) << " s)";
    for (const auto& n : notes) {
        os << "\n  - " << n;
    }
    return os.str();
}

SuiteResult verify_thm1(std::size_t trials, std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "thm1 loss contraction";
    r.worst_low = std::numeric_limits<double>::infinity();
    r.worst_high = -r.worst_low;
    Philox rng(seed, /*stream=*/1);
    constexpr double kLossBound = (59.0 / 64.0) * (59.0 / 64.0);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t d = 2 + t % 7;
        double target = rng.uniform(0.502, 1.498);
        if (std::abs(target - 1.0) < 1e-6) {
            target = 1.01;
        }
        const WeightVector w = sample_with_product(rng, d, target, 0.05, 3.0);
        ++r.checks;
        try {
            const double k = verify_loss_contraction(w);
            r.worst_low = std::min(r.worst_low, k);
            r.worst_high = std::max(r.worst_high, k);
            if (!(k > -4.0 / 5.0 && k < 59.0 / 64.0)) {
                note_violation(r, "k = " + format_g(k) + " outside (-4/5, 59/64)");
            }
            const double before = loss(w);
            const double after = loss(gd_step_adaptive(w).w_next);
            if (!(after <= kLossBound * before)) {
                note_violation(r, "loss factor " + format_g(after / before) +
                                      " above (59/64)^2");
            }
        } catch (const Error& e) {
            note_violation(r, e.what());
        }
    }
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_thm2(std::size_t trials, std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "thm2 imbalance contraction";
    r.worst_low = std::numeric_limits<double>::infinity();
    r.worst_high = -r.worst_low;
    Philox rng(seed, /*stream=*/2);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t d = 2 + t % 7;
        double target = rng.uniform(0.502, 1.498);
        if (std::abs(target - 1.0) < 1e-6) {
            target = 1.01;
        }
        const WeightVector w = sample_with_product(rng, d, target, 0.05, 3.0);
        const StepOutcome step = gd_step_adaptive(w);
        const double lr = step.lr_used;
        const double rsd = product(w) - 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                const double before = pairwise_imbalance(w, i, j);
                if (before == 0.0) {
                    continue;
                }
                ++r.checks;
                const double ww = w[i] * w[j];
                const double closed =
                    1.0 - 4.0 * lr * lr * rsd * rsd * product(w) * product(w) / (ww * ww);
                r.worst_low = std::min(r.worst_low, closed);
                r.worst_high = std::max(r.worst_high, closed);
                if (!(closed > 247.0 / 256.0 && closed <= 1.0)) {
                    note_violation(r, "pair factor " + format_g(closed) +
                                          " outside (247/256, 1]");
                }
                // Empirical ratio agrees with the closed form on
                // well-conditioned pairs.
                if (std::abs(before) >= 0.01) {
                    const double after = pairwise_imbalance(step.w_next, i, j);
                    if (std::abs(after / before - closed) > 1e-12 * std::abs(closed)) {
                        note_violation(r, "empirical/closed mismatch " +
                                              format_g(after / before - closed));
                    }
                }
            }
        }
        if (!(layer_imbalance(step.w_next) <=
              layer_imbalance(w) * (1.0 + kRatioSlack))) {
            note_violation(r, "max-pair imbalance increased");
        }
    }
    r.elapsed_seconds = timer.seconds();
    return r;
}

namespace {

// Shared driver for the Theorem 3/4 run suites. Factors are asserted only
// for steps whose starting state satisfies the theorem hypothesis
// |W - 1| < delta; steps outside it are executed and counted but carry no
// guarantee. A run stops early if it wanders far outside every band.
struct NoiseRunChecks {
    std::size_t steps_total = 0;
    std::size_t steps_in_hypothesis = 0;
};

template <typename StepFn, typename ClosedFn>
NoiseRunChecks run_noise_like(SuiteResult& r, Philox& rng, double delta,
                              std::size_t steps, StepFn step_fn, ClosedFn closed_fn) {
    NoiseRunChecks counts;
    const std::size_t d = 2 + rng.next_u32() % 3;
    const double target = 1.0 + rng.uniform(-0.8 * delta, 0.8 * delta);
    WeightVector w = sample_with_product(rng, d, target, 0.05, 3.0);
    for (std::size_t s = 0; s < steps; ++s) {
        const double W = product(w);
        if (std::abs(W - 1.0) > 2.0) {
            break; // far outside any hypothesis; nothing left to check
        }
        const bool in_hypothesis = std::abs(W - 1.0) < delta;
        const double eta = rng.uniform(-delta, delta);
        const StepOutcome out = step_fn(w, eta);
        ++counts.steps_total;
        if (in_hypothesis) {
            ++counts.steps_in_hypothesis;
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = i + 1; j < d; ++j) {
                    if (pairwise_imbalance(w, i, j) == 0.0) {
                        continue;
                    }
                    ++r.checks;
                    const double k = closed_fn(w, out.lr_used, W, eta, i, j);
                    r.worst_low = std::min(r.worst_low, k);
                    r.worst_high = std::max(r.worst_high, k);
                    if (!(k > 0.0 && k <= 1.0)) {
                        note_violation(r, "pair factor " + format_g(k) +
                                              " outside (0, 1] at delta " + format_g(delta));
                    }
                }
            }
            if (!(layer_imbalance(out.w_next) <=
                  layer_imbalance(w) * (1.0 + kRatioSlack))) {
                note_violation(r, "imbalance increased inside hypothesis, delta " +
                                      format_g(delta));
            }
        }
        w = out.w_next;
    }
    return counts;
}

} // namespace

SuiteResult verify_thm3(std::size_t runs, std::size_t steps, std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "thm3 noise imbalance";
    r.worst_low = std::numeric_limits<double>::infinity();
    r.worst_high = -r.worst_low;
    const double deltas[] = {0.1, 0.3, 0.45};
    std::size_t total = 0, in_hyp = 0;
    for (double delta : deltas) {
        Philox rng(seed, static_cast<std::uint64_t>(delta * 1000));
        for (std::size_t run = 0; run < runs; ++run) {
            const auto counts = run_noise_like(
                r, rng, delta, steps,
                [](const WeightVector& w, double eta) {
                    return gd_step_noise(w, adaptive_lr_noise(w), eta);
                },
                [](const WeightVector& w, double lr, double W, double eta,
                   std::size_t i, std::size_t j) {
                    const double amp = 2.0 * lr * (1.0 + eta) * (W * (1.0 + eta) - 1.0);
                    const double ww = w[i] * w[j];
                    return 1.0 - amp * amp * W * W / (ww * ww);
                });
            total += counts.steps_total;
            in_hyp += counts.steps_in_hypothesis;
        }
    }
    r.notes.push_back(std::to_string(in_hyp) + "/" + std::to_string(total) +
                      " steps inside the hypothesis");
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_thm4(std::size_t runs, std::size_t steps, std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "thm4 sgd imbalance";
    r.worst_low = std::numeric_limits<double>::infinity();
    r.worst_high = -r.worst_low;
    const double deltas[] = {0.1, 0.5, 0.9};
    std::size_t total = 0, in_hyp = 0;
    for (double delta : deltas) {
        Philox rng(seed, 4000 + static_cast<std::uint64_t>(delta * 1000));
        for (std::size_t run = 0; run < runs; ++run) {
            const auto counts = run_noise_like(
                r, rng, delta, steps,
                [delta](const WeightVector& w, double eta) {
                    return sgd_step(w, adaptive_lr_sgd(w, delta), eta);
                },
                [](const WeightVector& w, double lr, double W, double eta,
                   std::size_t i, std::size_t j) {
                    const double ww = w[i] * w[j];
                    const double dev = W - 1.0 + eta;
                    return 1.0 - 4.0 * lr * lr * dev * dev * W * W / (ww * ww);
                });
            total += counts.steps_total;
            in_hyp += counts.steps_in_hypothesis;
        }
    }
    r.notes.push_back(std::to_string(in_hyp) + "/" + std::to_string(total) +
                      " steps inside the hypothesis");
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_conservation(std::size_t trajectories, std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "hyperbola conservation";
    Philox rng(seed, 5);
    FlowSpec spec;
    spec.lambda = 0.5;
    spec.t_end = 10.0;
    spec.dt = 1e-3;
    double worst = 0.0;
    for (std::size_t t = 0; t < trajectories; ++t) {
        const std::size_t d = 2 + t % 2;
        std::vector<double> w0(d);
        for (double& v : w0) {
            v = rng.uniform(0.6, 1.6);
        }
        const WeightVector w(w0);
        ++r.checks;
        const FlowResult flow = integrate_flow(w, spec);
        if (flow.singularity) {
            note_violation(r, "unexpected singularity");
            continue;
        }
        const double dev = hyperbola_conservation(flow);
        worst = std::max(worst, dev);
        if (!(dev <= 1e-8)) {
            note_violation(r, "conservation deviation " + format_g(dev) + " > 1e-8");
        }
        // Fourth-order check on a subsample: halving dt must shrink the
        // deviation by at least 8x (16x for an exact fourth-order method).
        if (t < 3 && dev > 1e-13) {
            FlowSpec half = spec;
            half.dt = spec.dt / 2.0;
            const double dev_half = hyperbola_conservation(integrate_flow(w, half));
            ++r.checks;
            if (!(dev_half * 8.0 <= dev)) {
                note_violation(r, "halving dt shrank deviation only " +
                                      format_g(dev / std::max(dev_half, 1e-300)) + "x");
            }
        }
    }
    r.worst_high = worst;
    r.notes.push_back("worst deviation " + format_g(worst));
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_wd_decay(std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "wd imbalance decay";
    Philox rng(seed, 6);
    const double params[] = {0.05, 0.1};
    const double times[] = {0.5, 1.0, 2.0};
    double worst = 0.0;
    for (double lambda : params) {
        for (double mu : params) {
            std::vector<double> w0 = {rng.uniform(1.2, 1.6), rng.uniform(0.5, 0.9)};
            const WeightVector w(w0);
            const double d0 = pairwise_imbalance(w, 0, 1);
            FlowSpec spec;
            spec.variant = FlowVariant::weight_decay;
            spec.mu = mu;
            spec.lambda = lambda;
            spec.t_end = 2.0;
            spec.dt = 1e-3;
            const FlowResult flow = integrate_flow(w, spec);
            for (double t_check : times) {
                ++r.checks;
                const auto it = std::find_if(flow.states.begin(), flow.states.end(),
                                             [&](const FlowState& s) {
                                                 return std::abs(s.t - t_check) < 1e-9;
                                             });
                if (it == flow.states.end()) {
                    note_violation(r, "missing state at t = " + format_g(t_check));
                    continue;
                }
                const double expected = d0 * std::exp(-4.0 * lambda * mu * t_check);
                const double actual = pairwise_imbalance(it->w, 0, 1);
                const double rel = std::abs(actual - expected) / std::abs(expected);
                worst = std::max(worst, rel);
                if (!(rel <= 1e-6)) {
                    note_violation(r, "relative error " + format_g(rel) + " at lambda " +
                                          format_g(lambda) + ", mu " + format_g(mu));
                }
            }
        }
    }
    r.worst_high = worst;
    r.notes.push_back("worst relative error " + format_g(worst));
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_divergence(std::size_t n_rates) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "divergence witness";
    r.worst_low = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_rates; ++i) {
        const double frac = n_rates > 1 ? static_cast<double>(i) / (n_rates - 1) : 0.0;
        const double lr = std::pow(10.0, -4.0 + 4.0 * frac);
        ++r.checks;
        try {
            const WeightVector w = divergence_witness(lr);
            const double before = loss(w);
            const double after = loss(gd_step(w, lr).w_next);
            const double ratio = after / before;
            r.worst_low = std::min(r.worst_low, ratio);
            r.worst_high = std::max(r.worst_high, ratio);
            if (!(after > before)) {
                note_violation(r, "witness failed to increase loss at lr " + format_g(lr));
            }
        } catch (const Error& e) {
            note_violation(r, e.what());
        }
    }
    r.notes.push_back("smallest loss blow-up " + format_g(r.worst_low) + "x");
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_sgd_variance(std::size_t dataset_size, std::size_t trials,
                                std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "sgd variance scaling";
    const Dataset ds = Dataset::generate_normalized(dataset_size, 0.5, seed);
    const std::size_t batches[] = {4, 8, 16, 32, 64};
    std::vector<double> xs, ys;
    Philox rng(seed, 9);
    for (std::size_t b : batches) {
        if (b > dataset_size) {
            continue;
        }
        Philox stream = rng.split(b);
        const double var = sgd_noise_variance(ds, b, trials, 1.0, stream);
        xs.push_back(1.0 / static_cast<double>(b) - 1.0 / static_cast<double>(dataset_size));
        ys.push_back(var);
    }
    // Least-squares line y = a*x + c.
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double fit = slope * xs[i] + intercept;
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    const double r2 = 1.0 - ss_res / ss_tot;
    const double var_b4 = ys.empty() ? 0.0 : ys.front();
    r.checks = 2;
    if (!(r2 >= 0.95)) {
        note_violation(r, "R^2 = " + format_g(r2) + " < 0.95");
    }
    if (!(std::abs(intercept) <= 0.05 * var_b4)) {
        note_violation(r, "intercept " + format_g(intercept) + " above 5% of B=4 variance");
    }
    r.worst_high = r2;
    r.notes.push_back("R^2 = " + format_g(r2) + ", slope = " + format_g(slope) +
                      ", intercept = " + format_g(intercept));
    r.elapsed_seconds = timer.seconds();
    return r;
}

namespace {

// One two-phase run; asserts loss monotone before entry and max-pair
// imbalance monotone from entry + margin on.
void check_two_phase(SuiteResult& r, const RunConfig& cfg, const char* kind) {
    constexpr std::size_t kSettleMargin = 5;
    const RunResult result = run_simulation(cfg);
    ++r.checks;
    if (!result.phase_entry_step) {
        note_violation(r, std::string(kind) + " run never entered its band");
        return;
    }
    const std::size_t entry = *result.phase_entry_step;
    const auto& recs = result.records;
    for (std::size_t s = 0; s + 1 < entry; ++s) {
        if (!(recs[s + 1].loss <= recs[s].loss * (1.0 + kRatioSlack))) {
            note_violation(r, std::string(kind) + " loss increased before entry at step " +
                                  std::to_string(s));
            return;
        }
    }
    for (std::size_t s = entry + kSettleMargin; s + 1 < recs.size(); ++s) {
        if (!(recs[s + 1].imbalance <=
              recs[s].imbalance * (1.0 + kRatioSlack) + 1e-18)) {
            note_violation(r, std::string(kind) + " imbalance increased after entry at step " +
                                  std::to_string(s));
            return;
        }
    }
}

} // namespace

SuiteResult verify_two_phase(std::size_t wd_runs, std::size_t noise_runs,
                             std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "two-phase structure";
    Philox rng(seed, 10);
    for (std::size_t i = 0; i < wd_runs; ++i) {
        RunConfig cfg;
        cfg.rule = Rule::wd;
        cfg.mu = (i % 2) ? 0.1 : 0.05;
        cfg.steps = 400;
        cfg.seed = derive_run_seed(seed, i);
        const std::size_t d = 2 + i % 2;
        const bool above = rng.next_u32() & 1u;
        const double target = above ? rng.uniform(1.2, 1.45) : rng.uniform(0.55, 0.8);
        const WeightVector w0 = sample_with_product(rng, d, target, 0.2, 3.0);
        cfg.init.kind = InitSpec::Kind::explicit_list;
        cfg.init.w0.assign(w0.begin(), w0.end());
        cfg.d = d;
        check_two_phase(r, cfg, "wd");
    }
    for (std::size_t i = 0; i < noise_runs; ++i) {
        RunConfig cfg;
        cfg.rule = Rule::noise;
        cfg.delta = 0.15 + 0.1 * static_cast<double>(i % 3);
        cfg.steps = 300;
        cfg.seed = derive_run_seed(seed ^ 0xABCDULL, i);
        const std::size_t d = 2 + i % 2;
        const Band band = noise_band(cfg.delta);
        const double target = rng.uniform(0.5, band.lo - 0.05);
        const WeightVector w0 = sample_with_product(rng, d, target, 0.2, 3.0);
        cfg.init.kind = InitSpec::Kind::explicit_list;
        cfg.init.w0.assign(w0.begin(), w0.end());
        cfg.d = d;
        check_two_phase(r, cfg, "noise");
    }
    r.elapsed_seconds = timer.seconds();
    return r;
}

SuiteResult verify_bands(std::uint64_t seed) {
    Stopwatch timer;
    SuiteResult r;
    r.name = "bands";

    // Closed-form spot checks.
    ++r.checks;
    const Band nb = noise_band(0.2);
    if (std::abs(nb.lo - (1.0 - 0.2 / 1.2)) > 1e-15 || std::abs(nb.hi - 1.25) > 1e-15) {
        note_violation(r, "noise band formula mismatch");
    }
    ++r.checks;
    const Band wb = wd_band(WeightVector({1.0, 1.0}), 0.1);
    if (std::abs(wb.lo - 0.9) > 1e-15 || wb.hi != 1.0) {
        note_violation(r, "wd band formula mismatch");
    }
    ++r.checks;
    if (sgd_band_condition(1.0, 0.3) || !sgd_band_condition(1.05, -0.1)) {
        note_violation(r, "sgd band condition mismatch");
    }

    // Outside the noise band the realized per-step loss never increases.
    Philox rng(seed, 11);
    for (std::size_t i = 0; i < 50; ++i) {
        RunConfig cfg;
        cfg.rule = Rule::noise;
        cfg.delta = 0.15 + 0.1 * static_cast<double>(i % 3);
        cfg.steps = 200;
        cfg.seed = derive_run_seed(seed ^ 0xBEEFULL, i);
        const Band band = noise_band(cfg.delta);
        const double target = rng.uniform(0.5, band.lo - 0.05);
        const WeightVector w0 = sample_with_product(rng, 2 + i % 2, target, 0.2, 3.0);
        cfg.init.kind = InitSpec::Kind::explicit_list;
        cfg.init.w0.assign(w0.begin(), w0.end());
        const RunResult result = run_simulation(cfg);
        for (std::size_t s = 0; s + 1 < result.records.size(); ++s) {
            const auto& rec = result.records[s];
            if (band.contains(rec.W)) {
                continue;
            }
            ++r.checks;
            if (!(result.records[s + 1].loss <= rec.loss * (1.0 + kRatioSlack))) {
                note_violation(r, "loss increased outside the noise band at step " +
                                      std::to_string(s));
            }
        }
    }

    const SuiteResult decay = verify_wd_decay(seed);
    const SuiteResult phases = verify_two_phase(50, 50, seed);
    r.checks += decay.checks + phases.checks;
    r.violations += decay.violations + phases.violations;
    for (const auto& n : decay.notes) r.notes.push_back("wd-decay: " + n);
    for (const auto& n : phases.notes) r.notes.push_back("two-phase: " + n);
    r.elapsed_seconds = timer.seconds();
    return r;
}

} // namespace dln
