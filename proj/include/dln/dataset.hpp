#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dln/errors.hpp"
#include "dln/rng.hpp"

namespace dln {

struct Sample {
    double x = 0.0;
    double y = 0.0;
};

/// Normalized scalar dataset: sum x = 0, mean x^2 = 1, sum y = 0,
/// mean x*y = 1 (each to 1e-10 absolute). Immutable after construction.
class Dataset {
public:
    /// Draws x from a standard normal and y = x + noise_level * normal,
    /// then applies the exact affine correction (center x, rescale x,
    /// center y, rescale y) so all four constraints hold. Deterministic
    /// given seed. Throws DegenerateSampleError after 10 degenerate draws.
    static Dataset generate_normalized(std::size_t n, double noise_level,
                                       std::uint64_t seed);

    std::size_t size() const noexcept { return samples_.size(); }
    const Sample& operator[](std::size_t i) const noexcept { return samples_[i]; }
    std::span<const Sample> samples() const noexcept { return samples_; }

    /// CSV with header "x,y", one row per sample, 17 significant digits.
    void write_csv(const std::filesystem::path& path) const;

private:
    explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}

    std::vector<Sample> samples_;
};

/// B distinct sample indices, stored sorted.
struct Batch {
    std::vector<std::size_t> indices;

    std::size_t size() const noexcept { return indices.size(); }
};

/// Uniform sample of `batch_size` distinct indices (without replacement).
/// Throws BadBatchSizeError unless 1 <= batch_size <= ds.size().
Batch sample_batch(const Dataset& ds, std::size_t batch_size, Philox& rng);

/// Mini-batch deviations of the two normalized moments:
/// eta1 = (1/B) sum x^2 - 1 (data noise), eta2 = (1/B) sum x*y - 1
/// (label noise). Both vanish at B = N.
struct NoiseDecomposition {
    double eta1 = 0.0;
    double eta2 = 0.0;

    /// Combined SGD noise at end-to-end weight W: eta = W*eta1 - eta2.
    double combined(double w_product) const noexcept {
        return w_product * eta1 - eta2;
    }
};

NoiseDecomposition noise_decomposition(const Dataset& ds, const Batch& batch);

/// Monte Carlo estimate of Var[eta] with eta = w_ref*eta1 - eta2, over
/// `trials` independent batches of size `batch_size`. Returns exactly 0
/// at batch_size == ds.size(). Requires trials >= 100.
double sgd_noise_variance(const Dataset& ds, std::size_t batch_size,
                          std::size_t trials, double w_ref, Philox& rng);

} // namespace dln
