#pragma once

// Time-dependent Schroedinger equation i dpsi/dt = H(a(t)) psi on a uniform
// grid, with H held constant at the midpoint parameters over each step.

#include <qls/errors.hpp>
#include <qls/hamiltonian.hpp>
#include <qls/operators.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace qls {

enum class StepMethod { exact, rk4 };

inline std::string_view to_string(StepMethod m) { return m == StepMethod::exact ? "exact" : "rk4"; }

/// exp(-i H dt) from a Hermitian eigendecomposition, with its derivative
/// along a Hermitian direction.
class ExactStep {
public:
    ExactStep(const HermitianOperator& h, double dt) : dt_(dt) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix());
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        vectors_ = es.eigenvectors();
        energies_ = es.eigenvalues();
        phases_ = CVector(energies_.size());
        for (Eigen::Index m = 0; m < energies_.size(); ++m) phases_(m) = std::exp(-kI * energies_(m) * dt);
    }

    CVector apply(const CVector& psi) const {
        return vectors_ * phases_.cwiseProduct(vectors_.adjoint() * psi);
    }

    /// U^dagger v (backward step).
    CVector apply_adjoint(const CVector& v) const {
        return vectors_ * phases_.conjugate().cwiseProduct(vectors_.adjoint() * v);
    }

    /// d/de exp(-i (H + e D) dt) at e = 0, applied to psi.
    CVector derivative_apply(const CMatrix& direction, const CVector& psi) const {
        const Eigen::Index n = energies_.size();
        CMatrix d = vectors_.adjoint() * direction * vectors_;
        for (Eigen::Index m = 0; m < n; ++m) {
            for (Eigen::Index k = 0; k < n; ++k) {
                // (e^{-i w_m dt} - e^{-i w_k dt}) / (w_m - w_k), written via sinc so the
                // degenerate limit -i dt e^{-i w dt} is reached smoothly.
                const double half = 0.5 * (energies_(m) - energies_(k)) * dt_;
                const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
                const complex mean_phase = std::exp(-kI * 0.5 * (energies_(m) + energies_(k)) * dt_);
                d(m, k) *= -kI * dt_ * mean_phase * sinc;
            }
        }
        return vectors_ * (d * (vectors_.adjoint() * psi));
    }

    const RVector& energies() const noexcept { return energies_; }

private:
    double dt_;
    CMatrix vectors_;
    RVector energies_;
    CVector phases_;
};

namespace detail {

inline CVector rk4_advance(const CVector& psi, const CMatrix& h, double dt) {
    const auto rhs = [&](const CVector& v) -> CVector { return -kI * (h * v); };
    const CVector k1 = rhs(psi);
    const CVector k2 = rhs(psi + 0.5 * dt * k1);
    const CVector k3 = rhs(psi + 0.5 * dt * k2);
    const CVector k4 = rhs(psi + dt * k3);
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline CVector advance(const CVector& psi, const HermitianOperator& h, double dt, StepMethod method) {
    if (method == StepMethod::rk4) return rk4_advance(psi, h.matrix(), dt);
    return ExactStep(h, dt).apply(psi);
}

/// <psi|Theta|psi> / <psi|psi>, insensitive to rounding-level norm drift.
inline double raw_expectation(const HermitianOperator& theta, const CVector& psi) {
    return psi.dot(theta.matrix() * psi).real() / psi.squaredNorm();
}

}  // namespace detail

/// One step exp(-i H dt) psi.
inline State step(const State& psi, const HermitianOperator& h, double dt, StepMethod method = StepMethod::exact) {
    if (!(dt > 0.0)) throw InvalidArgument("step size must be positive");
    if (h.dim() != psi.dim()) throw DimensionMismatch("step", h.dim(), psi.dim());
    return State(detail::advance(psi.amplitudes(), h, dt, method));
}

struct Trajectory {
    std::vector<double> times;
    std::vector<CVector> states;
    std::vector<double> theta_values;
    std::vector<double> norms;

    std::size_t size() const noexcept { return times.size(); }

    void push(double t, CVector psi, const HermitianOperator& theta) {
        times.push_back(t);
        theta_values.push_back(detail::raw_expectation(theta, psi));
        norms.push_back(psi.norm());
        states.push_back(std::move(psi));
    }
};

struct PropagateOptions {
    StepMethod method = StepMethod::exact;
};

/// Step count keeping |H| dt <= 0.05 for a Hamiltonian norm bound.
inline std::size_t default_step_count(double norm_bound, double duration) {
    if (!(duration > 0.0)) return 0;
    const double n = std::ceil(norm_bound * duration / 0.05);
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

inline void check_model_inputs(const ParameterizedHamiltonian& model, const ParameterPath& path,
                               const State& psi0, const HermitianOperator& theta) {
    if (path.n_params() != model.n_params()) {
        throw DimensionMismatch("path parameters", model.n_params(), path.n_params());
    }
    if (psi0.dim() != model.dim()) throw DimensionMismatch("initial state", model.dim(), psi0.dim());
    if (theta.dim() != model.dim()) throw DimensionMismatch("observable", model.dim(), theta.dim());
}

/// Propagate psi0 along the protocol, recording <Theta> and |psi| at every
/// grid point. H over [t_k, t_{k+1}] is H(path.midpoint(k)).
inline Trajectory propagate(const ParameterizedHamiltonian& model, const ParameterPath& path, const State& psi0,
                            const HermitianOperator& theta, const PropagateOptions& opts = {}) {
    check_model_inputs(model, path, psi0, theta);
    const double dt = path.uniform_dt();
    Trajectory traj;
    traj.times.reserve(path.size());
    traj.states.reserve(path.size());
    CVector psi = psi0.amplitudes();
    traj.push(path.times().front(), psi, theta);
    for (std::size_t k = 0; k < path.steps(); ++k) {
        const HermitianOperator h = model.assemble(path.midpoint(k));
        psi = detail::advance(psi, h, dt, opts.method);
        traj.push(path.times()[k + 1], psi, theta);
    }
    return traj;
}

}  // namespace qls
