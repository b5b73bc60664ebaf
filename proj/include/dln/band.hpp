#pragma once

namespace dln {

enum class BandKind {
    weight_decay,
    noise,
    sgd_noise,
};

/// An interval [lo, hi] on the end-to-end weight W delimiting a
/// regularization regime.
struct Band {
    double lo = 0.0;
    double hi = 0.0;
    BandKind kind = BandKind::weight_decay;

    bool contains(double w_product) const noexcept {
        return lo <= w_product && w_product <= hi;
    }
};

enum class Phase {
    optimization,
    regularization,
};

} // namespace dln
