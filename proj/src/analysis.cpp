#include "dln/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dln {

Band wd_band(const WeightVector& w, double mu) {
    if (mu < 0.0) {
        throw Error("weight decay mu must be >= 0");
    }
    const double W = product(w);
    if (!(W > 0.0)) {
        throw NonpositiveWError("wd_band requires W > 0, got W = " + std::to_string(W));
    }
    const double sum_inv = sum_inverse_squares(w);
    const double d = static_cast<double>(w.size());
    return Band{1.0 - mu * d / (W * sum_inv), 1.0, BandKind::weight_decay};
}

Band noise_band(double delta) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw BadDeltaError("noise band requires delta in (0, 1/2), got " +
                            std::to_string(delta));
    }
    return Band{1.0 - delta / (1.0 + delta), 1.0 + delta / (1.0 - delta), BandKind::noise};
}

bool sgd_band_condition(double w_product, double eta) {
    return (w_product - 1.0) * (w_product - 1.0 + eta) < 0.0;
}

PhaseDecomposition detect_phases(std::span<const TrajectoryRecord> records,
                                 std::span<const Band> bands) {
    if (records.empty()) {
        throw Error("detect_phases needs a non-empty trajectory");
    }
    if (bands.size() != records.size()) {
        throw Error("detect_phases needs one band per record");
    }
    PhaseDecomposition out;
    out.entry_step = records.size();
    for (std::size_t s = 0; s < records.size(); ++s) {
        if (bands[s].contains(records[s].W)) {
            out.entry_step = s;
            break;
        }
    }
    out.phases.resize(records.size());
    for (std::size_t s = 0; s < records.size(); ++s) {
        out.phases[s] = s < out.entry_step ? Phase::optimization : Phase::regularization;
    }
    return out;
}

double verify_loss_contraction(const WeightVector& w) {
    const double W = product(w);
    if (W == 1.0) {
        throw OnManifoldError("contraction factor undefined at W = 1");
    }
    if (!(std::abs(W - 1.0) < 0.5)) {
        throw OutsideHypothesisError("|W - 1| >= 1/2");
    }
    const StepOutcome step = gd_step_adaptive(w);
    const double k = step.loss_factor;
    // |W-1| < 1/2 forces W > 0, so the case split is on the sign of W-1.
    const bool case1 = W < 1.0; // (W-1)W < 0
    const double lo = case1 ? -4.0 / 5.0 : -1.0 / 8.0;
    const double hi = case1 ? 7.0 / 8.0 : 59.0 / 64.0;
    if (!(k > lo && k < hi)) {
        throw Error("loss contraction factor " + std::to_string(k) +
                    " outside (" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
    }
    return k;
}

double verify_imbalance_contraction(const WeightVector& w, std::size_t i, std::size_t j) {
    const double before = pairwise_imbalance(w, i, j);
    if (before == 0.0) {
        throw ZeroImbalanceError("D_ij is zero; factor undefined");
    }
    const double W = product(w);
    if (!(std::abs(W - 1.0) < 0.5)) {
        throw OutsideHypothesisError("|W - 1| >= 1/2");
    }
    const StepOutcome step = gd_step_adaptive(w);
    const double after = pairwise_imbalance(step.w_next, i, j);
    const double empirical = after / before;

    // The proof's closed form is exact for one synchronous step and is
    // numerically robust where the empirical ratio may cancel.
    const double lr = step.lr_used;
    const double r = W - 1.0;
    const double closed = 1.0 - 4.0 * lr * lr * r * r * W * W / (w[i] * w[i] * w[j] * w[j]);
    if (!(closed > 247.0 / 256.0 && closed <= 1.0)) {
        throw Error("imbalance contraction factor " + std::to_string(closed) +
                    " outside (247/256, 1]");
    }
    return empirical;
}

WeightVector divergence_witness(double lr, std::size_t d) {
    if (!(lr > 0.0)) {
        throw Error("divergence witness needs lr > 0");
    }
    if (d < 2) {
        throw Error("divergence witness needs d >= 2");
    }
    // (s, 1.1/s, 1, ..., 1): for s = 1/lr the d = 2 post-step factor
    // 1 - 2*lr*(s^2 + (1.1/s)^2) + 4*lr^2*0.1*1.1 is below -1 for every
    // lr > 0; s keeps doubling until the increase is verified.
    double s = 1.0 / lr;
    for (int attempt = 0; attempt < 200; ++attempt) {
        std::vector<double> entries(d, 1.0);
        entries[0] = s;
        entries[1] = 1.1 / s;
        WeightVector w(std::move(entries));
        const StepOutcome step = gd_step(w, lr);
        if (loss(step.w_next) > loss(w)) {
            return w;
        }
        s *= 2.0;
    }
    throw Error("no divergence witness found; lr = " + std::to_string(lr));
}

double hyperbola_conservation(const FlowResult& flow) {
    if (flow.states.empty()) {
        return 0.0;
    }
    const WeightVector& w0 = flow.states.front().w;
    const std::size_t d = w0.size();
    double worst = 0.0;
    for (const FlowState& state : flow.states) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                const double dev = std::abs(pairwise_imbalance(state.w, i, j) -
                                            pairwise_imbalance(w0, i, j));
                worst = std::max(worst, dev);
            }
        }
    }
    return worst;
}

double band_keeping_policy(const WeightVector& w, double lr_current) {
    const double W = product(w);
    const double residual = std::abs(W - 1.0);
    const double sum_inv = sum_inverse_squares(w);
    // W^2 floored away from the saddle at W = 0, where any rate stalls.
    const double w_sq = std::max(W * W, 0.25);
    double lr = lr_current;
    if (residual < 0.25) {
        lr *= 2.0;
    } else if (residual > 0.5) {
        lr *= 0.5;
    }
    // To first order one step multiplies the residual by
    // k = 1 - 2*lr*W^2*sum_inv. The ceiling permits k down to -1.5 near
    // the target band (so doubling can push the residual back up) but
    // only contraction (k >= 0) while far outside; the floor keeps
    // k <= 3/4 so halving can never strand the state.
    const double hi = (residual > 0.5 ? 0.5 : 1.25) / (w_sq * sum_inv);
    const double lo = std::max(1e-8, 0.125 / (w_sq * sum_inv));
    return std::clamp(lr, lo, hi);
}

} // namespace dln
