#include "test_util.hpp"

#include <qls/propagator.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qls;

namespace {

ParameterizedHamiltonian rabi_model(double omega) {
    return ParameterizedHamiltonian(HermitianOperator::zero(2),
                                    {{"E", ops::pauli_x(), Coefficient::linear(0.5 * omega), TermRole::control}});
}

}  // namespace

TEST(Step, ZeroHamiltonianIsIdentity) {
    std::mt19937_64 rng(2);
    const auto psi = test::random_state(rng, 3);
    const auto out = step(psi, HermitianOperator::zero(3), 0.7);
    EXPECT_LT((out.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(step(psi, HermitianOperator::zero(3), 0.0), InvalidArgument);
}

TEST(Step, DiagonalPhase) {
    const auto out = step(State::basis(2, 0), ops::pauli_z(), 0.1);
    EXPECT_LT(std::abs(out.amplitudes()(0) - std::exp(complex(0.0, -0.1))), 1e-15);
    EXPECT_NEAR(expectation(ops::pauli_z(), out), 1.0, 1e-15);
}

TEST(Step, RabiHalfPeriodInverts) {
    // H = (1/2) sx, <sz>(t) = cos t
    const auto h = 0.5 * ops::pauli_x();
    State psi = State::basis(2, 0);
    const int n = 100;
    for (int k = 0; k < n; ++k) psi = step(psi, h, M_PI / n);
    EXPECT_NEAR(expectation(ops::pauli_z(), psi), -1.0, 1e-9);
}

TEST(Step, CompositionAndUnitarity) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = test::random_hermitian(rng, 4);
        const auto psi = test::random_state(rng, 4);
        const auto twice = step(step(psi, h, 0.03), h, 0.03);
        const auto once = step(psi, h, 0.06);
        EXPECT_LT((twice.amplitudes() - once.amplitudes()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(std::abs(once.norm() - 1.0), 1e-12);
    }
}

TEST(Propagate, CumulativeNormDriftAndEnergyConservation) {
    std::mt19937_64 rng(6);
    const auto h0 = test::random_hermitian(rng, 4);
    const ParameterizedHamiltonian m(h0, {{"E", test::random_hermitian(rng, 4), Coefficient::linear(), TermRole::control}});
    RVector a(1);
    a << 0.3;
    const auto path = ParameterPath::constant(a, 100.0, 10000);
    const auto psi0 = test::random_state(rng, 4);
    const auto h = m.assemble(a);
    const auto traj = propagate(m, path, psi0, h);
    for (double n : traj.norms) EXPECT_LT(std::abs(n - 1.0), 1e-9);
    for (double e : traj.theta_values) EXPECT_NEAR(e, traj.theta_values.front(), 1e-10);
}

TEST(Propagate, ConservedObservable) {
    const ParameterizedHamiltonian m(ops::pauli_z(), {{"E", ops::pauli_z(), Coefficient::linear(), TermRole::control}});
    RVector a(1);
    a << 0.4;
    std::mt19937_64 rng(8);
    const auto traj = propagate(m, ParameterPath::constant(a, 10.0, 1000), test::random_state(rng, 2), ops::pauli_z());
    for (double v : traj.theta_values) EXPECT_NEAR(v, traj.theta_values.front(), 1e-10);
}

TEST(Propagate, RabiTracksCosine) {
    const auto m = rabi_model(1.0);
    RVector a(1);
    a << 1.0;
    const auto traj = propagate(m, ParameterPath::constant(a, 2 * M_PI, 1000), State::basis(2, 0), ops::pauli_z());
    ASSERT_EQ(traj.size(), 1001u);
    for (std::size_t k = 0; k < traj.size(); ++k) EXPECT_NEAR(traj.theta_values[k], std::cos(traj.times[k]), 1e-6);
}

TEST(Propagate, SinglePointProtocol) {
    const auto m = rabi_model(1.0);
    RMatrix v(1, 1);
    v << 1.0;
    const auto traj = propagate(m, ParameterPath({0.0}, v), State::basis(2, 0), ops::pauli_z());
    ASSERT_EQ(traj.size(), 1u);
    EXPECT_EQ(traj.theta_values[0], 1.0);
    EXPECT_EQ(traj.states[0], State::basis(2, 0).amplitudes());
}

TEST(Propagate, RejectsNonUniformGrid) {
    const auto m = rabi_model(1.0);
    RMatrix v = RMatrix::Ones(3, 1);
    EXPECT_THROW(propagate(m, ParameterPath({0.0, 0.1, 0.3}, v), State::basis(2, 0), ops::pauli_z()), InvalidArgument);
}

TEST(Propagate, Rk4IsFourthOrder) {
    std::mt19937_64 rng(12);
    const ParameterizedHamiltonian m(test::random_hermitian(rng, 3),
                                     {{"E", test::random_hermitian(rng, 3), Coefficient::linear(), TermRole::control}});
    RVector a(1);
    a << 0.5;
    const auto psi0 = test::random_state(rng, 3);
    const auto err = [&](std::size_t steps) {
        const auto path = ParameterPath::constant(a, 2.0, steps);
        const auto exact = propagate(m, path, psi0, ops::number_op(3));
        const auto rk = propagate(m, path, psi0, ops::number_op(3), {StepMethod::rk4});
        return (exact.states.back() - rk.states.back()).norm();
    };
    const double ratio = err(40) / err(80);
    EXPECT_GE(ratio, 12.0);
    EXPECT_LE(ratio, 20.0);
    EXPECT_LT(err(200), 1e-6);
}

TEST(ExactStep, DerivativeMatchesFiniteDifference) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const auto h = test::random_hermitian(rng, 4);
        const auto d = test::random_hermitian(rng, 4);
        const auto psi = test::random_state(rng, 4);
        const double dt = 0.3;
        const double eps = 1e-6;
        const CVector fd = (ExactStep(h + eps * d, dt).apply(psi.amplitudes()) -
                            ExactStep(h - eps * d, dt).apply(psi.amplitudes())) /
                           (2 * eps);
        const CVector an = ExactStep(h, dt).derivative_apply(d.matrix(), psi.amplitudes());
        EXPECT_LT((fd - an).cwiseAbs().maxCoeff(), 1e-8);
    }
    // Degenerate spectrum: derivative of exp(-i e V dt) at e = 0 is -i dt V.
    const auto v = ops::pauli_x();
    const CVector an = ExactStep(HermitianOperator::zero(2), 0.2).derivative_apply(v.matrix(), State::basis(2, 0).amplitudes());
    EXPECT_LT((an - (-kI * 0.2 * v.matrix().col(0))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DefaultSteps, KeepsNormTimesDtSmall) {
    EXPECT_EQ(default_step_count(2.0, 1.0), 40u);
    EXPECT_EQ(default_step_count(0.0, 1.0), 1u);
}
