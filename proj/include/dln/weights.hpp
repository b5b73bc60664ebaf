#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dln/errors.hpp"

namespace dln {

/// The network state w = (w_1, ..., w_d) of a scalar deep linear network.
/// Immutable after construction; d >= 2 and all entries finite.
/// Zero entries are legal states, but operations that divide by w_i
/// (gradient, Hessian, adaptive rates) reject them with ZeroWeightError.
class WeightVector {
public:
    explicit WeightVector(std::vector<double> entries);

    static WeightVector balanced(std::size_t d, double value);

    std::size_t size() const noexcept { return entries_.size(); }
    double operator[](std::size_t i) const noexcept { return entries_[i]; }
    std::span<const double> entries() const noexcept { return entries_; }

    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    bool operator==(const WeightVector&) const = default;

private:
    std::vector<double> entries_;
};

/// End-to-end product W = w_1 * ... * w_d, accumulated left to right.
double product(const WeightVector& w);

/// (W - 1)^2.
double loss(const WeightVector& w);

/// Product of all entries except w_i. Computed as w_product / w_i when
/// |w_i| > 1e-12, otherwise by re-multiplying the other d-1 entries.
/// `w_product` must be product(w).
double cofactor(const WeightVector& w, std::size_t i, double w_product);

/// Sum of 1/w_i^2. Throws ZeroWeightError on an exact zero entry.
double sum_inverse_squares(const WeightVector& w);

/// Loss gradient: component i is 2(W-1) * W/w_i.
std::vector<double> gradient(const WeightVector& w);

/// Dense symmetric d x d matrix, row-major.
class HessianMatrix {
public:
    HessianMatrix(std::size_t dim, std::vector<double> values);

    std::size_t dim() const noexcept { return dim_; }
    double operator()(std::size_t i, std::size_t j) const noexcept {
        return values_[i * dim_ + j];
    }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t dim_;
    std::vector<double> values_;
};

/// Loss Hessian: diagonal 2W^2/w_i^2, off-diagonal 2(2W-1)W/(w_i w_j).
HessianMatrix hessian(const WeightVector& w);

/// Largest eigenvalue of hessian(w) by power iteration (relative
/// convergence threshold 1e-10, at most 10*d iterations). Only valid on
/// the minima manifold; throws NotOnManifoldError if |W-1| > manifold_tol.
double hessian_top_eigenvalue(const WeightVector& w, double manifold_tol = 1e-9);

/// Layer imbalance D(w) = max over pairs of |w_i^2 - w_j^2|.
double layer_imbalance(const WeightVector& w);

/// Signed pairwise imbalance w_i^2 - w_j^2.
double pairwise_imbalance(const WeightVector& w, std::size_t i, std::size_t j);

} // namespace dln
