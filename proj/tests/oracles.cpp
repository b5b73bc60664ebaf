#include "oracles.hpp"

#include <Eigen/Dense>

#include "dln/errors.hpp"

namespace oracle {

double raw_loss(const std::vector<double>& w) {
    double p = 1.0;
    for (double v : w) p *= v;
    return (p - 1.0) * (p - 1.0);
}

std::vector<double> fd_gradient(const ScalarFn& f, std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

std::vector<double> fd_hessian(const ScalarFn& f, std::vector<double> x, double h) {
    const std::size_t d = x.size();
    std::vector<double> m(d * d);
    const double f0 = f(x);
    for (std::size_t i = 0; i < d; ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        m[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = i + 1; j < d; ++j) {
            const double xj = x[j];
            x[i] = xi + h;
            x[j] = xj + h;
            const double fpp = f(x);
            x[j] = xj - h;
            const double fpm = f(x);
            x[i] = xi - h;
            x[j] = xj + h;
            const double fmp = f(x);
            x[j] = xj - h;
            const double fmm = f(x);
            x[i] = xi;
            x[j] = xj;
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
    return m;
}

std::vector<double> sym_eigenvalues(const dln::HessianMatrix& m) {
    const auto d = static_cast<Eigen::Index>(m.dim());
    Eigen::MatrixXd mat(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            mat(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mat);
    if (solver.info() != Eigen::Success) {
        throw dln::Error("dense eigen-decomposition failed");
    }
    std::vector<double> out(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        out[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    }
    return out;
}

void for_each_batch(std::size_t n, std::size_t batch_size,
                    const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> pick(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) pick[i] = i;
    while (true) {
        fn(pick);
        // advance to the next lexicographic combination
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(batch_size) - 1;
        while (i >= 0 &&
               pick[static_cast<std::size_t>(i)] == n - batch_size + static_cast<std::size_t>(i)) {
            --i;
        }
        if (i < 0) {
            return;
        }
        ++pick[static_cast<std::size_t>(i)];
        for (auto j = static_cast<std::size_t>(i) + 1; j < batch_size; ++j) {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

ExactNoiseStats exact_noise_stats(const dln::Dataset& ds, std::size_t batch_size,
                                  double w_ref) {
    ExactNoiseStats stats;
    double sum = 0.0;
    double sum_sq = 0.0;
    for_each_batch(ds.size(), batch_size, [&](const std::vector<std::size_t>& pick) {
        double xx = 0.0, xy = 0.0;
        for (std::size_t i : pick) {
            xx += ds[i].x * ds[i].x;
            xy += ds[i].x * ds[i].y;
        }
        const double b = static_cast<double>(batch_size);
        const double eta = w_ref * (xx / b - 1.0) - (xy / b - 1.0);
        sum += eta;
        sum_sq += eta * eta;
        ++stats.batches;
    });
    const double n = static_cast<double>(stats.batches);
    stats.mean = sum / n;
    stats.variance = sum_sq / n - stats.mean * stats.mean;
    return stats;
}

} // namespace oracle
