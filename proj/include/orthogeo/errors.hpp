#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace orthogeo {

// Base class for all recoverable errors thrown by the library. Callers that
// only care about "something went wrong in orthogeo" can catch this.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch in a matrix/vector operation.
struct DimensionError : Error {
    using Error::Error;
};

// Input to a factorization is numerically column-rank-deficient.
struct RankDeficientError : Error {
    std::size_t column;
    RankDeficientError(const std::string& msg, std::size_t col) : Error(msg), column(col) {}
};

// Input to cayley() is not skew-symmetric within tolerance.
struct InvalidSkewError : Error {
    using Error::Error;
};

// A linear solve hit a pivot too small to trust.
struct SingularMatrixError : Error {
    using Error::Error;
};

// (I + X) was not invertible inside cayley().
struct SingularCayleyError : Error {
    using Error::Error;
};

// Non-finite values or numerically meaningless requests (NaN gradients,
// all-zero spectra, degenerate encoder outputs).
struct NumericError : Error {
    using Error::Error;
};

// Bad run configuration or malformed config/checkpoint input.
struct ConfigError : Error {
    using Error::Error;
};

// File could not be read, written, or parsed.
struct IoError : Error {
    using Error::Error;
};

// Caller broke an API contract (stale cache, mismatched buffers). These are
// programming errors, not data errors, hence logic_error.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace orthogeo
