#include "dln/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dln {

namespace {

// Below this magnitude, W/w_i falls back to re-multiplying the other
// entries instead of dividing.
constexpr double kDivisionFloor = 1e-12;

void require_nonzero(const WeightVector& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) {
            throw ZeroWeightError("w_" + std::to_string(i + 1) +
                                  " is zero; W/w_i is undefined");
        }
    }
}

} // namespace

WeightVector::WeightVector(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.size() < 2) {
        throw Error("a weight vector needs d >= 2 layers, got d = " +
                    std::to_string(entries_.size()));
    }
    for (double v : entries_) {
        if (!std::isfinite(v)) {
            throw Error("weight entries must be finite");
        }
    }
}

WeightVector WeightVector::balanced(std::size_t d, double value) {
    return WeightVector(std::vector<double>(d, value));
}

double product(const WeightVector& w) {
    double p = 1.0;
    for (double v : w) {
        p *= v;
    }
    return p;
}

double loss(const WeightVector& w) {
    const double r = product(w) - 1.0;
    return r * r;
}

double cofactor(const WeightVector& w, std::size_t i, double w_product) {
    if (i >= w.size()) {
        throw IndexError("layer index " + std::to_string(i) + " out of range");
    }
    if (std::abs(w[i]) > kDivisionFloor) {
        return w_product / w[i];
    }
    double p = 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (k != i) {
            p *= w[k];
        }
    }
    return p;
}

double sum_inverse_squares(const WeightVector& w) {
    require_nonzero(w);
    double s = 0.0;
    for (double v : w) {
        s += 1.0 / (v * v);
    }
    return s;
}

std::vector<double> gradient(const WeightVector& w) {
    require_nonzero(w);
    const double W = product(w);
    const double r = W - 1.0;
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        g[i] = 2.0 * r * cofactor(w, i, W);
    }
    return g;
}

HessianMatrix::HessianMatrix(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
    if (values_.size() != dim_ * dim_) {
        throw Error("hessian storage size mismatch");
    }
}

HessianMatrix hessian(const WeightVector& w) {
    require_nonzero(w);
    const std::size_t d = w.size();
    const double W = product(w);
    std::vector<double> cof(d);
    for (std::size_t i = 0; i < d; ++i) {
        cof[i] = cofactor(w, i, W);
    }
    std::vector<double> h(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        h[i * d + i] = 2.0 * cof[i] * cof[i]; // 2 W^2 / w_i^2
        for (std::size_t j = i + 1; j < d; ++j) {
            // W/(w_i w_j) is the product of the other d-2 entries.
            double w_over_ij;
            if (std::abs(w[j]) > kDivisionFloor) {
                w_over_ij = cof[i] / w[j];
            } else {
                w_over_ij = 1.0;
                for (std::size_t k = 0; k < d; ++k) {
                    if (k != i && k != j) {
                        w_over_ij *= w[k];
                    }
                }
            }
            const double value = 2.0 * (2.0 * W - 1.0) * w_over_ij;
            h[i * d + j] = value;
            h[j * d + i] = value;
        }
    }
    return HessianMatrix(d, std::move(h));
}

double hessian_top_eigenvalue(const WeightVector& w, double manifold_tol) {
    const double W = product(w);
    if (std::abs(W - 1.0) > manifold_tol) {
        throw NotOnManifoldError("|W - 1| = " + std::to_string(std::abs(W - 1.0)) +
                                 " exceeds the manifold tolerance");
    }
    const HessianMatrix h = hessian(w);
    const std::size_t d = h.dim();

    // Power iteration; deterministic start, restart once if the first
    // start is (numerically) orthogonal to the top eigenvector.
    const std::size_t max_iters = 10 * d;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<double> x(d);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = attempt == 0 ? 1.0 + 0.01 * static_cast<double>(i) : (i % 2 ? -1.0 : 1.0);
        }
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : x) v /= norm;

        double eig = 0.0;
        bool converged = false;
        std::vector<double> y(d);
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    acc += h(i, j) * x[j];
                }
                y[i] = acc;
            }
            double rayleigh = 0.0, ynorm = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                rayleigh += x[i] * y[i];
                ynorm += y[i] * y[i];
            }
            ynorm = std::sqrt(ynorm);
            if (ynorm == 0.0) {
                break; // x in the kernel; retry from the other start
            }
            for (std::size_t i = 0; i < d; ++i) {
                x[i] = y[i] / ynorm;
            }
            if (iter > 0 && std::abs(rayleigh - eig) <= 1e-10 * std::max(1.0, std::abs(rayleigh))) {
                eig = rayleigh;
                converged = true;
                break;
            }
            eig = rayleigh;
        }
        if (converged || attempt == 1) {
            return eig;
        }
    }
    return 0.0; // unreachable
}

double layer_imbalance(const WeightVector& w) {
    double lo = w[0] * w[0];
    double hi = lo;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double sq = w[i] * w[i];
        lo = std::min(lo, sq);
        hi = std::max(hi, sq);
    }
    return hi - lo;
}

double pairwise_imbalance(const WeightVector& w, std::size_t i, std::size_t j) {
    if (i >= w.size() || j >= w.size()) {
        throw IndexError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") out of range for d = " + std::to_string(w.size()));
    }
    return w[i] * w[i] - w[j] * w[j];
}

} // namespace dln
