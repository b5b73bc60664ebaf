#pragma once

#include <array>
#include <cstdint>

namespace dln {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The key is the 64-bit seed; the 128-bit counter holds a 64-bit stream
/// id in its high words and a 64-bit block position in its low words, so
/// distinct streams of the same seed never overlap. All outputs are pure
/// integer functions of (seed, stream, position) and therefore identical
/// on every platform. `split` derives a child stream deterministically;
/// one generator instance must not be shared across threads.
class Philox {
public:
    explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1), 53 random bits.
    double next_double() noexcept;

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept;

    /// Standard normal via Box-Muller (pairs cached).
    double normal() noexcept;

    /// Child generator on an independent stream. Children of distinct
    /// indices, and the parent itself, produce unrelated sequences.
    Philox split(std::uint64_t index) const noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// The raw 10-round block function; exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffer_used_ = 4;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// Stable 64-bit mix (splitmix64 finalizer); used for run-seed derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Per-run seed for sweep run `index` under `master_seed`; order-independent.
std::uint64_t derive_run_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

} // namespace dln
