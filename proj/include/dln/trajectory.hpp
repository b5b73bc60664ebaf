#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dln/band.hpp"
#include "dln/errors.hpp"

namespace dln {

/// Per-step snapshot of a training run. Derived columns satisfy
/// loss = (W-1)^2 and imbalance = max-pair |w_i^2 - w_j^2| (1e-12 rel).
struct TrajectoryRecord {
    std::int64_t step = 0;
    std::optional<double> t; // continuous-time runs only
    std::vector<double> w;
    double W = 0.0;
    double loss = 0.0;
    double imbalance = 0.0;
    double lr = 0.0;
    std::optional<double> band_lo;
    std::optional<double> band_hi;
    std::optional<double> eta; // realized noise draw
    std::optional<Phase> phase;

    bool operator==(const TrajectoryRecord&) const = default;
};

/// Writes `step,t,w_1,...,w_d,W,loss,imbalance,lr,band_lo,band_hi,eta,phase`.
/// Reals use shortest round-trip decimals; absent fields are empty.
void write_trajectory_csv(std::span<const TrajectoryRecord> records,
                          const std::filesystem::path& path);

/// Inverse of write_trajectory_csv. Throws FormatError (with the 1-based
/// line number) on a malformed header, column count, or field.
std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path);

/// Two-column (w_i, w_j) file of the trajectory, plus a companion file
/// (suffix `_hyperbola` before the extension) with the minima hyperbola
/// w_i * w_j = 1 sampled at 512 points over the trajectory's bounding box.
void export_phase_plot_data(std::span<const TrajectoryRecord> records,
                            std::size_t i, std::size_t j,
                            const std::filesystem::path& points_path);

/// One manifest entry per trajectory in a run directory.
struct ManifestEntry {
    std::string run_id;
    std::string rule;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::string lr_policy; // "adaptive" or the decimal value
    std::optional<double> mu;
    std::optional<double> delta;
    std::optional<std::size_t> batch_size; // B
    std::optional<std::size_t> dataset_size; // N
    std::size_t steps = 0;
    std::string path; // trajectory CSV, relative to the manifest
};

void write_manifest(std::span<const ManifestEntry> entries,
                    const std::filesystem::path& path);

} // namespace dln
