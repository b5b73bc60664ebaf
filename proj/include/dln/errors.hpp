#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dln {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operation needed W/w_i but some w_i is exactly zero.
struct ZeroWeightError : Error {
    using Error::Error;
};

/// A spectral claim was requested off the minima manifold (|W-1| > tol).
struct NotOnManifoldError : Error {
    using Error::Error;
};

/// Layer index outside [0, d).
struct IndexError : Error {
    using Error::Error;
};

/// Dataset generation produced a degenerate sample set (zero second moment
/// or zero x-y correlation) ten times in a row.
struct DegenerateSampleError : Error {
    using Error::Error;
};

struct BadBatchSizeError : Error {
    using Error::Error;
};

struct BadDeltaError : Error {
    using Error::Error;
};

/// A theorem-gated operation was called outside the theorem's hypothesis.
struct OutsideHypothesisError : Error {
    using Error::Error;
};

/// Contraction factor requested at W = 1, where it is undefined.
struct OnManifoldError : Error {
    using Error::Error;
};

struct ZeroImbalanceError : Error {
    using Error::Error;
};

/// The weight-decay band formula requires W > 0.
struct NonpositiveWError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Malformed trajectory CSV; `line` is 1-based (0 = whole file).
struct FormatError : Error {
    FormatError(const std::string& msg, std::size_t line_number)
        : Error(msg + (line_number ? " (line " + std::to_string(line_number) + ")" : "")),
          line(line_number) {}
    std::size_t line;
};

/// Invalid run configuration; `field` names the offending entry.
struct ConfigError : Error {
    ConfigError(const std::string& field_name, const std::string& msg)
        : Error("config field '" + field_name + "': " + msg), field(field_name) {}
    std::string field;
};

} // namespace dln
