#include "test_util.hpp"

#include <qls/operators.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qls;

namespace {

CMatrix sy() { return ops::pauli_y().matrix(); }
CMatrix sz() { return ops::pauli_z().matrix(); }

}  // namespace

TEST(State, RejectsUnnormalizedAndTinyVectors) {
    EXPECT_THROW(State(CVector::Constant(2, 1.0)), InvalidArgument);
    EXPECT_THROW(State(CVector::Ones(1)), InvalidArgument);
    EXPECT_THROW(State::normalized(CVector::Zero(3)), InvalidArgument);
    EXPECT_NO_THROW(State::normalized(CVector::Constant(2, 1.0)));
}

TEST(HermitianOperator, RejectsNonHermitian) {
    CMatrix m(2, 2);
    m << 1.0, 2.0, 0.0, 1.0;
    EXPECT_THROW(HermitianOperator{m}, InvalidArgument);
    CMatrix r(2, 3);
    r.setZero();
    EXPECT_THROW(HermitianOperator{r}, InvalidArgument);
}

TEST(Commutator, SelfCommutatorVanishes) {
    std::mt19937_64 rng(1);
    const auto a = test::random_hermitian(rng, 5);
    EXPECT_EQ(test::max_abs(commutator(a, a)), 0.0);
}

TEST(Commutator, PauliAlgebra) {
    EXPECT_LT(test::max_abs(commutator(ops::pauli_x(), ops::pauli_y()) - 2.0 * kI * sz()), 1e-15);
    EXPECT_LT(test::max_abs(commutator(ops::pauli_z(), ops::pauli_x()) - 2.0 * kI * sy()), 1e-15);
}

TEST(Commutator, DimensionMismatchReportsBothSizes) {
    try {
        commutator(ops::pauli_x(), ops::number_op(3));
        FAIL() << "expected DimensionMismatch";
    } catch (const DimensionMismatch& e) {
        EXPECT_EQ(e.expected(), 2u);
        EXPECT_EQ(e.actual(), 3u);
    }
}

TEST(Commutator, AntisymmetryAndHermitianImaginaryPart) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const auto a = test::random_hermitian(rng, n);
        const auto b = test::random_hermitian(rng, n);
        const double scale = a.matrix().norm() * b.matrix().norm();
        EXPECT_LE(test::max_abs(commutator(a, b) + commutator(b, a)), 1e-13 * scale);
        EXPECT_NO_THROW(i_commutator(a, b));
    }
}

TEST(Expectation, Basics) {
    std::mt19937_64 rng(3);
    const auto psi = test::random_state(rng, 4);
    EXPECT_NEAR(expectation(HermitianOperator::identity(4), psi), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(expectation(ops::pauli_z(), State::basis(2, 0)), 1.0);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(expectation(ops::pauli_z(), State(CVector{{r, r}})), 0.0, 1e-16);
    EXPECT_NEAR(expectation(ops::pauli_y(), State(CVector{{complex(r), complex(0.0, -r)}})), -1.0, 1e-15);
    EXPECT_THROW(expectation(ops::pauli_z(), test::random_state(rng, 3)), DimensionMismatch);
}

TEST(Expectation, RealOnRandomStates) {
    std::mt19937_64 rng(11);
    const auto theta = test::random_hermitian(rng, 6);
    for (int k = 0; k < 1000; ++k) {
        const auto psi = test::random_state(rng, 6);
        EXPECT_LT(std::abs(braket(theta.matrix(), psi).imag()), 1e-12);
    }
}

TEST(Expectation, Linearity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 100; ++k) {
        const auto a = test::random_hermitian(rng, 4);
        const auto b = test::random_hermitian(rng, 4);
        const auto psi = test::random_state(rng, 4);
        const double alpha = u(rng), beta = u(rng);
        EXPECT_NEAR(expectation(alpha * a + beta * b, psi),
                    alpha * expectation(a, psi) + beta * expectation(b, psi), 1e-12);
    }
}

TEST(Builtins, OscillatorOperators) {
    const std::size_t n = 6;
    // [a, a^dagger] = 1 except in the truncated corner.
    const CMatrix a = ops::annihilation(n);
    const CMatrix c = a * a.adjoint() - a.adjoint() * a;
    for (Eigen::Index k = 0; k + 1 < static_cast<Eigen::Index>(n); ++k) EXPECT_NEAR(c(k, k).real(), 1.0, 1e-14);
    EXPECT_LT(test::max_abs(ops::creation(n) * ops::annihilation(n) - ops::number_op(n).matrix()), 1e-14);
    EXPECT_NEAR(expectation(ops::position_op(n), State::basis(n, 0)), 0.0, 1e-15);
    EXPECT_NEAR(expectation(ops::number_op(n), State::basis(n, 3)), 3.0, 1e-15);
    EXPECT_NO_THROW(ops::momentum_op(n));
}
