#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dln/band.hpp"
#include "dln/dynamics.hpp"
#include "dln/trajectory.hpp"
#include "dln/weights.hpp"

namespace dln {

/// Weight-decay band [1 - mu*d/(W * sum 1/w_i^2), 1]. State-dependent;
/// requires W > 0 (NonpositiveWError) and nonzero entries.
Band wd_band(const WeightVector& w, double mu);

/// Noise band (1 - delta/(1+delta), 1 + delta/(1-delta)).
/// Throws BadDeltaError unless 0 < delta < 1/2.
Band noise_band(double delta);

/// Realized SGD-noise band condition: true iff (W-1)(W-1+eta) < 0,
/// i.e. the step's loss-decrease guarantee is void.
bool sgd_band_condition(double w_product, double eta);

/// Two-phase split of a trajectory at the first band entry.
struct PhaseDecomposition {
    /// Index of the first record whose W lies in that record's band;
    /// records.size() if the band is never entered.
    std::size_t entry_step = 0;
    std::vector<Phase> phases; // optimization strictly before entry_step
};

/// `bands[s]` is the band evaluated at step s; entries may be skipped by
/// passing lo > hi (an empty band never matches).
PhaseDecomposition detect_phases(std::span<const TrajectoryRecord> records,
                                 std::span<const Band> bands);

/// Empirical Theorem-1 contraction factor k = (W(t+1)-1)/(W(t)-1) from
/// one gd_step_adaptive. Verifies the proof's case bounds
/// ((W-1)W < 0: k in (-4/5, 7/8); (W-1)W > 0: k in (-1/8, 59/64)) and
/// throws Error on violation. Requires |W-1| < 1/2 and W != 1.
double verify_loss_contraction(const WeightVector& w);

/// Empirical Theorem-2 factor D_ij(t+1)/D_ij(t) from one gd_step_adaptive.
/// Verifies the closed form 1 - 4*lr^2*(W-1)^2*W^2/(w_i w_j)^2 lies in
/// (247/256, 1]. Requires |W-1| < 1/2 and D_ij != 0 (ZeroImbalanceError).
double verify_imbalance_contraction(const WeightVector& w, std::size_t i, std::size_t j);

/// A point whose loss strictly increases after one gd_step with the given
/// fixed learning rate: w = (s, 1.1/s, 1, ..., 1) with s grown from 1/lr
/// until the increase is verified.
WeightVector divergence_witness(double lr, std::size_t d = 2);

/// Max over steps and pairs of |D_ij(t) - D_ij(0)| along a flow trajectory.
double hyperbola_conservation(const FlowResult& flow);

/// Loss-band keeping heuristic: doubles lr when |W-1| < 1/4, halves it
/// when |W-1| > 1/2, then clamps to [1e-8, 4 * adaptive_lr_gd(w)].
double band_keeping_policy(const WeightVector& w, double lr_current);

} // namespace dln
