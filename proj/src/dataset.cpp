#include "dln/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <system_error>

namespace dln {

namespace {

std::string format_17g(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

} // namespace

Dataset Dataset::generate_normalized(std::size_t n, double noise_level,
                                     std::uint64_t seed) {
    if (n < 2) {
        throw Error("dataset needs N >= 2 samples, got N = " + std::to_string(n));
    }
    if (noise_level < 0.0) {
        throw Error("noise_level must be >= 0");
    }
    const Philox base(seed);
    for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
        Philox rng = base.split(attempt);
        std::vector<Sample> s(n);
        for (auto& smp : s) {
            smp.x = rng.normal();
            smp.y = smp.x + noise_level * rng.normal();
        }

        // Exact affine correction.
        double mean_x = 0.0;
        for (const auto& smp : s) mean_x += smp.x;
        mean_x /= static_cast<double>(n);
        for (auto& smp : s) smp.x -= mean_x;

        double second_moment = 0.0;
        for (const auto& smp : s) second_moment += smp.x * smp.x;
        second_moment /= static_cast<double>(n);
        if (second_moment == 0.0) {
            continue; // all x identical; degenerate
        }
        const double x_scale = std::sqrt(second_moment);
        for (auto& smp : s) smp.x /= x_scale;

        if (noise_level == 0.0) {
            // y == x identically once the label noise is off; assigning
            // keeps the pair bit-equal instead of merely close.
            for (auto& smp : s) smp.y = smp.x;
            return Dataset(std::move(s));
        }

        double mean_y = 0.0;
        for (const auto& smp : s) mean_y += smp.y;
        mean_y /= static_cast<double>(n);
        for (auto& smp : s) smp.y -= mean_y;

        double correlation = 0.0;
        for (const auto& smp : s) correlation += smp.x * smp.y;
        correlation /= static_cast<double>(n);
        if (correlation == 0.0) {
            continue;
        }
        for (auto& smp : s) smp.y /= correlation;
        return Dataset(std::move(s));
    }
    throw DegenerateSampleError("dataset generation degenerate 10 times in a row");
}

void Dataset::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << "x,y\n";
    for (const auto& smp : samples_) {
        out << format_17g(smp.x) << ',' << format_17g(smp.y) << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Batch sample_batch(const Dataset& ds, std::size_t batch_size, Philox& rng) {
    const std::size_t n = ds.size();
    if (batch_size < 1 || batch_size > n) {
        throw BadBatchSizeError("batch size " + std::to_string(batch_size) +
                                " not in [1, " + std::to_string(n) + "]");
    }
    // Partial Fisher-Yates over the index set; uniform over subsets.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < batch_size; ++i) {
        // Unbiased bounded draw by rejection on the top of the range.
        const std::uint64_t span = n - i;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = rng.next_u64();
        } while (r >= limit);
        std::swap(idx[i], idx[i + static_cast<std::size_t>(r % span)]);
    }
    Batch b;
    b.indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(batch_size));
    std::sort(b.indices.begin(), b.indices.end());
    return b;
}

NoiseDecomposition noise_decomposition(const Dataset& ds, const Batch& batch) {
    if (batch.indices.empty()) {
        throw BadBatchSizeError("empty batch");
    }
    double sum_xx = 0.0;
    double sum_xy = 0.0;
    for (std::size_t i : batch.indices) {
        if (i >= ds.size()) {
            throw IndexError("batch index " + std::to_string(i) + " out of range");
        }
        const Sample& smp = ds[i];
        sum_xx += smp.x * smp.x;
        sum_xy += smp.x * smp.y;
    }
    const double b = static_cast<double>(batch.size());
    return NoiseDecomposition{sum_xx / b - 1.0, sum_xy / b - 1.0};
}

double sgd_noise_variance(const Dataset& ds, std::size_t batch_size,
                          std::size_t trials, double w_ref, Philox& rng) {
    if (batch_size < 1 || batch_size > ds.size()) {
        throw BadBatchSizeError("batch size " + std::to_string(batch_size) +
                                " not in [1, " + std::to_string(ds.size()) + "]");
    }
    if (trials < 100) {
        throw Error("sgd_noise_variance needs trials >= 100");
    }
    if (batch_size == ds.size()) {
        return 0.0; // the full batch has no subsampling noise
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Batch b = sample_batch(ds, batch_size, rng);
        const double eta = noise_decomposition(ds, b).combined(w_ref);
        sum += eta;
        sum_sq += eta * eta;
    }
    const double nt = static_cast<double>(trials);
    const double mean = sum / nt;
    return sum_sq / nt - mean * mean;
}

} // namespace dln
