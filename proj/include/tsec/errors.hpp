#pragma once

#include <stdexcept>
#include <string>

namespace tsec {

/// Bad input: out-of-range levels, inconsistent sizes, invalid configuration.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested space or table exceeds the supported size.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// The MCMC sampler could not proceed (e.g. a non positive-definite precision).
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files. Carries the 1-based row number when known.
class IngestionError : public std::runtime_error {
public:
    IngestionError(const std::string& what, long row = -1)
        : std::runtime_error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}

    long row() const noexcept { return row_; }

private:
    long row_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

} // namespace detail
} // namespace tsec
