#pragma once

// Independent numerical oracles used by the test and acceptance suites.
// Everything here recomputes expected values from first principles and
// must stay decoupled from the implementation paths it checks.

#include <cstddef>
#include <functional>
#include <vector>

#include "dln/dataset.hpp"
#include "dln/weights.hpp"

namespace oracle {

using ScalarFn = std::function<double(const std::vector<double>&)>;

/// Central finite differences, one component per coordinate.
std::vector<double> fd_gradient(const ScalarFn& f, std::vector<double> x, double h);

/// Second-order central finite differences, dense symmetric matrix
/// (row-major).
std::vector<double> fd_hessian(const ScalarFn& f, std::vector<double> x, double h);

/// All eigenvalues of a symmetric matrix, ascending (dense solver).
std::vector<double> sym_eigenvalues(const dln::HessianMatrix& m);

/// Calls `fn` once per B-subset of {0..n-1}, in lexicographic order.
void for_each_batch(std::size_t n, std::size_t batch_size,
                    const std::function<void(const std::vector<std::size_t>&)>& fn);

/// Exact population statistics of eta = w_ref*eta1 - eta2 over all
/// (N choose B) batches.
struct ExactNoiseStats {
    double mean = 0.0;
    double variance = 0.0;
    std::size_t batches = 0;
};
ExactNoiseStats exact_noise_stats(const dln::Dataset& ds, std::size_t batch_size,
                                  double w_ref);

/// The scalar DLN loss on a raw vector, for finite-difference probes.
double raw_loss(const std::vector<double>& w);

} // namespace oracle
