#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dln {

/// Outcome of one verification suite. A suite passes iff violations == 0
/// (and, where a suite defines one, the runtime budget held).
struct SuiteResult {
    std::string name;
    std::size_t checks = 0;
    std::size_t violations = 0;
    double worst_low = 0.0;   // most extreme low-side factor seen
    double worst_high = 0.0;  // most extreme high-side factor seen
    double elapsed_seconds = 0.0;
    std::vector<std::string> notes;

    bool pass() const { return violations == 0; }
    std::string summary() const;
};

/// Theorem 1: over random w with d in {2..8}, |W-1| < 1/2, gd_step_adaptive
/// gives loss(t+1) <= (59/64)^2 loss(t) and k in (-4/5, 59/64) (case bounds
/// checked per sample).
SuiteResult verify_thm1(std::size_t trials, std::uint64_t seed);

/// Theorem 2: same sampling; every pairwise factor in (247/256, 1], closed
/// form and empirical ratio agreeing to 1e-12, max-pair imbalance
/// non-increasing.
SuiteResult verify_thm2(std::size_t trials, std::uint64_t seed);

/// Theorem 3: runs of gd_step_noise with adaptive_lr_noise and uniform
/// noise |eta| <= delta, delta in {0.1, 0.3, 0.45}; no step may increase
/// any pairwise imbalance, and steps taken from |W-1| < delta must have
/// factors in (0, 1].
SuiteResult verify_thm3(std::size_t runs, std::size_t steps, std::uint64_t seed);

/// Theorem 4: same shape with sgd_step, adaptive_lr_sgd, delta in
/// {0.1, 0.5, 0.9}.
SuiteResult verify_thm4(std::size_t runs, std::size_t steps, std::uint64_t seed);

/// Hyperbola conservation: RK4 plain flow (dt 1e-3, t_end 10) keeps
/// max |D_ij(t) - D_ij(0)| <= 1e-8 over random d=2,3 starts, and halving
/// dt shrinks the worst deviation by >= 8x.
SuiteResult verify_conservation(std::size_t trajectories, std::uint64_t seed);

/// Weight-decay imbalance decay: RK4 WD flow matches D(0)*exp(-4*lambda*mu*t)
/// at t = 1 within 1e-6 relative for (lambda, mu) in {0.05, 0.1}^2.
SuiteResult verify_wd_decay(std::uint64_t seed);

/// Footnote divergence witness: for n_rates learning rates log-spaced in
/// [1e-4, 1], the constructed witness strictly increases loss in one step.
SuiteResult verify_divergence(std::size_t n_rates);

/// SGD noise variance scaling: Var[eta] against (1/B - 1/N) for
/// B in {4, 8, 16, 32, 64} is linear with R^2 >= 0.95 and intercept
/// within 5% of the B=4 variance.
SuiteResult verify_sgd_variance(std::size_t dataset_size, std::size_t trials,
                                std::uint64_t seed);

/// Two-phase structure: WD and noise runs have non-increasing loss before
/// band entry and non-increasing max-pair imbalance from entry+5 on.
SuiteResult verify_two_phase(std::size_t wd_runs, std::size_t noise_runs,
                             std::uint64_t seed);

/// Band arithmetic + per-step loss decrease outside the noise band
/// + verify_wd_decay + verify_two_phase, as one CLI suite.
SuiteResult verify_bands(std::uint64_t seed);

} // namespace dln
