#pragma once

// Dense complex linear algebra for finite-dimensional quantum systems.
// hbar = 1 throughout.

#include <qls/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

namespace qls {

using complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr complex kI{0.0, 1.0};

/// Normalized pure state of an N-level system, N >= 2.
class State {
public:
    static constexpr double kNormTolerance = 1e-9;

    explicit State(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() < 2) {
            throw InvalidArgument("state dimension must be at least 2, got " +
                                  std::to_string(amplitudes_.size()));
        }
        if (!amplitudes_.allFinite()) throw InvalidArgument("state has non-finite amplitudes");
        const double n = amplitudes_.norm();
        if (std::abs(n - 1.0) > kNormTolerance) {
            throw InvalidArgument("state is not normalized: |psi| = " + std::to_string(n));
        }
    }

    /// Explicit renormalization; rejects the zero vector.
    static State normalized(CVector v) {
        const double n = v.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize zero vector");
        return State(v / n);
    }

    /// Computational basis state |k> in dimension n.
    static State basis(std::size_t n, std::size_t k) {
        if (k >= n) throw InvalidArgument("basis index out of range");
        CVector v = CVector::Zero(static_cast<Eigen::Index>(n));
        v(static_cast<Eigen::Index>(k)) = 1.0;
        return State(std::move(v));
    }

    const CVector& amplitudes() const noexcept { return amplitudes_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
    double norm() const { return amplitudes_.norm(); }

private:
    CVector amplitudes_;
};

/// Hermitian N x N matrix. Hermiticity is checked on construction.
class HermitianOperator {
public:
    static constexpr double kHermitianTolerance = 1e-12;

    explicit HermitianOperator(CMatrix entries, const std::string& name = "operator")
        : entries_(std::move(entries)) {
        if (entries_.rows() != entries_.cols()) {
            throw InvalidArgument(name + " is not square (" + std::to_string(entries_.rows()) +
                                  "x" + std::to_string(entries_.cols()) + ")");
        }
        if (entries_.rows() < 1) throw InvalidArgument(name + " is empty");
        if (!entries_.allFinite()) throw InvalidArgument(name + " has non-finite entries");
        const double scale = std::max(1.0, entries_.cwiseAbs().maxCoeff());
        const double asym = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
        if (asym > kHermitianTolerance * scale) {
            throw InvalidArgument(name + " is not Hermitian (max |A - A^dagger| = " +
                                  std::to_string(asym) + ")");
        }
    }

    static HermitianOperator zero(std::size_t n) {
        const auto m = static_cast<Eigen::Index>(n);
        return HermitianOperator(CMatrix::Zero(m, m));
    }
    static HermitianOperator identity(std::size_t n) {
        const auto m = static_cast<Eigen::Index>(n);
        return HermitianOperator(CMatrix::Identity(m, m));
    }

    const CMatrix& matrix() const noexcept { return entries_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }

    /// Largest absolute eigenvalue.
    double spectral_norm() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(entries_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }

    HermitianOperator& operator+=(const HermitianOperator& other) {
        check_same_dim(other, "operator sum");
        entries_ += other.entries_;
        return *this;
    }
    HermitianOperator& operator-=(const HermitianOperator& other) {
        check_same_dim(other, "operator difference");
        entries_ -= other.entries_;
        return *this;
    }
    HermitianOperator& operator*=(double s) {
        entries_ *= s;
        return *this;
    }

    friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) { return a += b; }
    friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) { return a -= b; }
    friend HermitianOperator operator*(double s, HermitianOperator a) { return a *= s; }
    friend HermitianOperator operator*(HermitianOperator a, double s) { return a *= s; }

    void check_same_dim(const HermitianOperator& other, const std::string& what) const {
        if (other.dim() != dim()) throw DimensionMismatch(what, dim(), other.dim());
    }

private:
    CMatrix entries_;
};

/// AB - BA.
inline CMatrix commutator(const HermitianOperator& a, const HermitianOperator& b) {
    a.check_same_dim(b, "commutator");
    const CMatrix& A = a.matrix();
    const CMatrix& B = b.matrix();
    return A * B - B * A;
}

/// i[A, B], which is Hermitian whenever A and B are.
inline HermitianOperator i_commutator(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(kI * commutator(a, b), "i[A,B]");
}

/// <psi|M|psi> for an arbitrary square matrix.
inline complex braket(const CMatrix& m, const State& psi) {
    if (static_cast<std::size_t>(m.rows()) != psi.dim()) {
        throw DimensionMismatch("braket", static_cast<std::size_t>(m.rows()), psi.dim());
    }
    return psi.amplitudes().dot(m * psi.amplitudes());
}

/// Re <psi|Theta|psi>. An imaginary residual above 1e-10 means the input
/// was corrupted and is reported as an error.
inline double expectation(const HermitianOperator& theta, const State& psi) {
    if (theta.dim() != psi.dim()) throw DimensionMismatch("expectation", theta.dim(), psi.dim());
    const complex v = braket(theta.matrix(), psi);
    const double scale = std::max(1.0, theta.matrix().cwiseAbs().maxCoeff());
    if (std::abs(v.imag()) > 1e-10 * scale) {
        throw NumericalError("expectation value has imaginary residual " + std::to_string(v.imag()));
    }
    return v.real();
}

namespace ops {

inline HermitianOperator pauli_x() {
    CMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return HermitianOperator(m, "pauli_x");
}

inline HermitianOperator pauli_y() {
    CMatrix m(2, 2);
    m << 0.0, -kI, kI, 0.0;
    return HermitianOperator(m, "pauli_y");
}

inline HermitianOperator pauli_z() {
    CMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return HermitianOperator(m, "pauli_z");
}

/// Truncated oscillator lowering operator a, a|k> = sqrt(k)|k-1>.
inline CMatrix annihilation(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    CMatrix a = CMatrix::Zero(m, m);
    for (Eigen::Index k = 1; k < m; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

inline CMatrix creation(std::size_t n) { return annihilation(n).adjoint(); }

inline HermitianOperator number_op(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    CMatrix d = CMatrix::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) d(k, k) = static_cast<double>(k);
    return HermitianOperator(d, "number_op");
}

/// (a + a^dagger) / sqrt(2)
inline HermitianOperator position_op(std::size_t n) {
    const CMatrix a = annihilation(n);
    return HermitianOperator((a + a.adjoint()) / std::sqrt(2.0), "position_op");
}

/// i (a^dagger - a) / sqrt(2)
inline HermitianOperator momentum_op(std::size_t n) {
    const CMatrix a = annihilation(n);
    return HermitianOperator(kI * (a.adjoint() - a) / std::sqrt(2.0), "momentum_op");
}

}  // namespace ops

}  // namespace qls
