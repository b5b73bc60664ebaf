#pragma once

#include <cstddef>
#include <vector>

#include "dln/weights.hpp"

namespace dln {

struct PairwiseFactor {
    std::size_t i = 0;
    std::size_t j = 0;
    double factor = 0.0; // D_ij(t+1) / D_ij(t)
};

/// Result of one discrete training step.
struct StepOutcome {
    WeightVector w_next;
    double lr_used = 0.0;
    /// (W(t+1) - 1) / (W(t) - 1); NaN when W(t) == 1.
    double loss_factor = 0.0;
    /// One entry per pair (i < j) with D_ij(t) != 0.
    std::vector<PairwiseFactor> imbalance_factors;
};

/// Theorem-1 rate: 1 / (4 * sum(1/w_i^2)).
double adaptive_lr_gd(const WeightVector& w);

/// Theorem-3 rate: (1/2)(2/3)^5 / sum(1/w_i^2).
double adaptive_lr_noise(const WeightVector& w);

/// Theorem-4 rate: 1 / (2*delta*(1+delta)*sum(1/w_i^2)).
/// Throws BadDeltaError unless delta is in (0, 1).
double adaptive_lr_sgd(const WeightVector& w, double delta);

/// Plain GD: w_i <- w_i - 2*lr*(W-1)*(W/w_i), all coordinates from w(t).
StepOutcome gd_step(const WeightVector& w, double lr);

/// gd_step with lr = adaptive_lr_gd(w). Requires |W-1| < 1/2 (throws
/// OutsideHypothesisError), under which Theorems 1-2 bound the returned
/// factors: |loss_factor| < 59/64 and imbalance factors in (247/256, 1].
StepOutcome gd_step_adaptive(const WeightVector& w);

/// Weight decay: w_i <- w_i - 2*lr*((W-1)*(W/w_i) + mu*w_i).
StepOutcome gd_step_weight_decay(const WeightVector& w, double lr, double mu);

/// Noise augmentation, one draw per step shared by all coordinates:
/// w_i <- w_i - 2*lr*(1+eta)*(W*(1+eta) - 1)*(W/w_i).
StepOutcome gd_step_noise(const WeightVector& w, double lr, double eta);

/// Mini-batch SGD with combined noise eta = W*eta1 - eta2:
/// w_i <- w_i - 2*lr*(W - 1 + eta)*(W/w_i).
StepOutcome sgd_step(const WeightVector& w, double lr, double eta);

enum class FlowVariant {
    plain,
    weight_decay,
};

/// Continuous flow dw_i/dt = -2*lambda*((W-1)*(W/w_i) [+ mu*w_i]),
/// integrated with classical fixed-step RK4.
struct FlowSpec {
    FlowVariant variant = FlowVariant::plain;
    double mu = 0.0;     // weight_decay only
    double lambda = 1.0; // flow speed, > 0
    double t_end = 1.0;
    double dt = 1e-3;
};

struct FlowState {
    double t = 0.0;
    WeightVector w;
};

struct FlowResult {
    std::vector<FlowState> states; // state at t=0 and after every step
    /// True if integration stopped early because some |w_i| < 1e-9
    /// (or the state left the finite range); states holds the partial
    /// trajectory up to and including the offending step where possible.
    bool singularity = false;
};

FlowResult integrate_flow(const WeightVector& w0, const FlowSpec& spec);

} // namespace dln
