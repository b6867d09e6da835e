#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace qls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::string what, std::size_t expected, std::size_t actual)
        : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
                std::to_string(actual)),
          expected_(expected),
          actual_(actual) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

/// Raised when input data violates a documented precondition (non-Hermitian
/// matrix, unnormalized state, non-uniform grid, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// The control term has (numerically) no influence on d<Theta>/dt at the
/// current state, so the level-set equation cannot be solved for it.
class SingularControl : public Error {
public:
    explicit SingularControl(double denominator, std::string detail = {})
        : Error("singular control: i<[V_c, Theta]> = " + std::to_string(denominator) +
                (detail.empty() ? std::string{} : " (" + detail + ")")),
          denominator_(denominator) {}

    double denominator() const noexcept { return denominator_; }

private:
    double denominator_;
};

/// No sign change of Phi - c across a family of meshes.
class NoBracket : public Error {
public:
    NoBracket(std::size_t sample, double lo, double hi, double level)
        : Error("no bracket at sample " + std::to_string(sample) + ": Phi range [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "] does not contain " +
                std::to_string(level)),
          sample_(sample),
          lo_(lo),
          hi_(hi) {}

    std::size_t sample() const noexcept { return sample_; }
    double range_min() const noexcept { return lo_; }
    double range_max() const noexcept { return hi_; }

private:
    std::size_t sample_;
    double lo_;
    double hi_;
};

}  // namespace qls
