#include "dln/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dln {

namespace {

constexpr double kSingularityFloor = 1e-9;

// Shared update kernel: w_i(t+1) = w_i - coeff * (W/w_i) - shrink * w_i,
// every coordinate evaluated at w(t). All steppers funnel through this so
// that algebraically identical parameter choices (eta = 0, mu = 0) give
// bit-identical results.
StepOutcome apply_step(const WeightVector& w, double lr, double coeff, double shrink) {
    const std::size_t d = w.size();
    const double W = product(w);
    std::vector<double> next(d);
    for (std::size_t i = 0; i < d; ++i) {
        next[i] = w[i] - coeff * cofactor(w, i, W) - shrink * w[i];
    }
    StepOutcome out{WeightVector(std::move(next)), lr,
                    std::numeric_limits<double>::quiet_NaN(), {}};
    const double W_next = product(out.w_next);
    const double r = W - 1.0;
    if (r != 0.0) {
        out.loss_factor = (W_next - 1.0) / r;
    }
    out.imbalance_factors.reserve(d * (d - 1) / 2);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double before = pairwise_imbalance(w, i, j);
            if (before == 0.0) {
                continue;
            }
            const double after = pairwise_imbalance(out.w_next, i, j);
            out.imbalance_factors.push_back({i, j, after / before});
        }
    }
    return out;
}

void require_positive_lr(double lr) {
    if (!(lr > 0.0)) {
        throw Error("learning rate must be > 0, got " + std::to_string(lr));
    }
}

} // namespace

double adaptive_lr_gd(const WeightVector& w) {
    return 1.0 / (4.0 * sum_inverse_squares(w));
}

double adaptive_lr_noise(const WeightVector& w) {
    // (1/2) * (2/3)^5 = 16/243
    return (16.0 / 243.0) / sum_inverse_squares(w);
}

double adaptive_lr_sgd(const WeightVector& w, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw BadDeltaError("delta must be in (0, 1), got " + std::to_string(delta));
    }
    return 1.0 / (2.0 * delta * (1.0 + delta) * sum_inverse_squares(w));
}

StepOutcome gd_step(const WeightVector& w, double lr) {
    require_positive_lr(lr);
    sum_inverse_squares(w); // rejects exact-zero entries
    const double W = product(w);
    return apply_step(w, lr, 2.0 * lr * (W - 1.0), 0.0);
}

StepOutcome gd_step_adaptive(const WeightVector& w) {
    const double W = product(w);
    if (!(std::abs(W - 1.0) < 0.5)) {
        throw OutsideHypothesisError("|W - 1| = " + std::to_string(std::abs(W - 1.0)) +
                                     " >= 1/2; Theorem 1-2 guarantees void");
    }
    return gd_step(w, adaptive_lr_gd(w));
}

StepOutcome gd_step_weight_decay(const WeightVector& w, double lr, double mu) {
    require_positive_lr(lr);
    if (mu < 0.0) {
        throw Error("weight decay mu must be >= 0");
    }
    sum_inverse_squares(w);
    const double W = product(w);
    return apply_step(w, lr, 2.0 * lr * (W - 1.0), 2.0 * lr * mu);
}

StepOutcome gd_step_noise(const WeightVector& w, double lr, double eta) {
    require_positive_lr(lr);
    sum_inverse_squares(w);
    const double W = product(w);
    return apply_step(w, lr, 2.0 * lr * (1.0 + eta) * (W * (1.0 + eta) - 1.0), 0.0);
}

StepOutcome sgd_step(const WeightVector& w, double lr, double eta) {
    require_positive_lr(lr);
    sum_inverse_squares(w);
    const double W = product(w);
    return apply_step(w, lr, 2.0 * lr * (W - 1.0 + eta), 0.0);
}

namespace {

// Flow right-hand side. Uses the re-multiplication form of W/w_i near
// zero so intermediate RK4 stages may pass through tiny entries.
void flow_rhs(const FlowSpec& spec, const std::vector<double>& w, std::vector<double>& dw) {
    const std::size_t d = w.size();
    double W = 1.0;
    for (double v : w) W *= v;
    const double c = -2.0 * spec.lambda * (W - 1.0);
    for (std::size_t i = 0; i < d; ++i) {
        double cof;
        if (std::abs(w[i]) > 1e-12) {
            cof = W / w[i];
        } else {
            cof = 1.0;
            for (std::size_t k = 0; k < d; ++k) {
                if (k != i) cof *= w[k];
            }
        }
        dw[i] = c * cof;
        if (spec.variant == FlowVariant::weight_decay) {
            dw[i] -= 2.0 * spec.lambda * spec.mu * w[i];
        }
    }
}

bool state_singular(const std::vector<double>& w) {
    for (double v : w) {
        if (!std::isfinite(v) || std::abs(v) < kSingularityFloor) {
            return true;
        }
    }
    return false;
}

} // namespace

FlowResult integrate_flow(const WeightVector& w0, const FlowSpec& spec) {
    if (!(spec.lambda > 0.0)) {
        throw Error("flow lambda must be > 0");
    }
    if (!(spec.dt > 0.0) || !(spec.t_end > 0.0) || spec.dt > spec.t_end) {
        throw Error("flow requires 0 < dt <= t_end");
    }
    if (spec.variant == FlowVariant::weight_decay && spec.mu < 0.0) {
        throw Error("weight decay mu must be >= 0");
    }
    sum_inverse_squares(w0); // rejects exact zeros up front

    const std::size_t d = w0.size();
    std::vector<double> y(w0.begin(), w0.end());
    std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);

    FlowResult result;
    result.states.push_back({0.0, w0});

    const auto n_full = static_cast<std::size_t>(std::floor(spec.t_end / spec.dt + 1e-9));
    const double remainder = spec.t_end - static_cast<double>(n_full) * spec.dt;
    const bool has_tail = remainder > 1e-12 * spec.t_end;
    const std::size_t n_steps = n_full + (has_tail ? 1 : 0);

    double t = 0.0;
    for (std::size_t step = 0; step < n_steps; ++step) {
        const double h = (step < n_full) ? spec.dt : remainder;
        flow_rhs(spec, y, k1);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        flow_rhs(spec, tmp, k2);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        flow_rhs(spec, tmp, k3);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + h * k3[i];
        flow_rhs(spec, tmp, k4);
        for (std::size_t i = 0; i < d; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        t = (step < n_full) ? static_cast<double>(step + 1) * spec.dt : spec.t_end;

        bool finite = true;
        for (double v : y) finite = finite && std::isfinite(v);
        if (!finite) {
            result.singularity = true;
            break;
        }
        result.states.push_back({t, WeightVector(y)});
        if (state_singular(y)) {
            result.singularity = true;
            break;
        }
    }
    return result;
}

} // namespace dln
