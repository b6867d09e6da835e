#pragma once

// Adjoint-based optimal control of a single control field.
//
// The control is sampled on the propagation grid, E_k = E(t_k); step k
// evolves under H(a_sys, (E_k + E_{k+1}) / 2). The cost is
//
//   C = w_T (<Theta>(T) - Theta_E)^2
//     + w_R sum_k w_k (<Theta>(t_k) - Theta_E)^2
//     + w_F / 2 sum_k w_k E_k^2
//
// with trapezoidal weights w_k. Costates are the exact discrete adjoint of
// that scheme, so gradient() is the derivative of the discrete cost.

#include <qls/errors.hpp>
#include <qls/hamiltonian.hpp>
#include <qls/operators.hpp>
#include <qls/propagator.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

namespace qls {

struct CostConfig {
    double theta_target = 0.0;
    double w_terminal = 0.0;
    double w_running = 0.0;
    double w_fluence = 0.0;
    double horizon = 1.0;

    void validate() const {
        if (w_terminal < 0.0 || w_running < 0.0 || w_fluence < 0.0) {
            throw InvalidArgument("cost weights must be non-negative");
        }
        if (!(w_terminal > 0.0 || w_running > 0.0 || w_fluence > 0.0)) {
            throw InvalidArgument("at least one cost weight must be positive");
        }
        if (!(horizon > 0.0)) throw InvalidArgument("cost horizon must be positive");
    }

    friend bool operator==(const CostConfig&, const CostConfig&) = default;
};

struct CostBreakdown {
    double terminal = 0.0;
    double running = 0.0;
    double fluence = 0.0;
    double total = 0.0;
};

struct AdjointTrajectory {
    std::vector<double> times;
    std::vector<CVector> costates;
};

namespace detail {

inline std::vector<double> trapezoid_weights(const std::vector<double>& times) {
    const std::size_t n = times.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double h = times[k + 1] - times[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    return w;
}

}  // namespace detail

/// Discretized cost of a trajectory driven by `control`.
inline CostBreakdown cost(const Trajectory& traj, const std::vector<double>& control, const CostConfig& cc) {
    if (control.size() != traj.size()) throw DimensionMismatch("control samples", traj.size(), control.size());
    if (traj.size() == 0) throw InvalidArgument("empty trajectory");
    const auto w = detail::trapezoid_weights(traj.times);
    CostBreakdown c;
    const double dev_t = traj.theta_values.back() - cc.theta_target;
    c.terminal = cc.w_terminal * dev_t * dev_t;
    double running = 0.0;
    double fluence = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double dev = traj.theta_values[k] - cc.theta_target;
        running += w[k] * dev * dev;
        fluence += w[k] * control[k] * control[k];
    }
    c.running = cc.w_running * running;
    c.fluence = cc.w_fluence * 0.5 * fluence;
    c.total = c.terminal + c.running + c.fluence;
    return c;
}

/// Everything fixed during an optimization: the model, the system-parameter
/// course (its control column is replaced by the field), the initial state,
/// the observable and the cost weights.
struct ControlProblem {
    ParameterizedHamiltonian model;
    ParameterPath system_path;
    State psi0;
    HermitianOperator theta;
    CostConfig cost;

    std::size_t size() const noexcept { return system_path.size(); }

    ParameterPath path_for(const std::vector<double>& control) const {
        if (control.size() != system_path.size()) {
            throw DimensionMismatch("control samples", system_path.size(), control.size());
        }
        ParameterPath p = system_path;
        p.set_column(model.control_index(),
                     Eigen::Map<const RVector>(control.data(), static_cast<Eigen::Index>(control.size())));
        p.set_interpolation(model.control_index(), PathInterpolation::linear);
        return p;
    }

    Trajectory forward(const std::vector<double>& control) const {
        return propagate(model, path_for(control), psi0, theta);
    }

    CostBreakdown evaluate(const std::vector<double>& control) const {
        return qls::cost(forward(control), control, cost);
    }

    void validate() const {
        cost.validate();
        check_model_inputs(model, system_path, psi0, theta);
        const double dt = system_path.uniform_dt();
        const double span = system_path.times().back() - system_path.times().front();
        if (std::abs(span - cost.horizon) > 1e-9 * std::max(1.0, cost.horizon) || dt <= 0.0) {
            throw InvalidArgument("time grid does not span the cost horizon");
        }
    }
};

/// Backward costate sweep; costates[k] is dC/d(psi_k^*) including the
/// influence of every later grid point.
inline AdjointTrajectory adjoint_backward(const ControlProblem& p, const Trajectory& traj,
                                          const std::vector<double>& control) {
    if (traj.size() != p.size()) throw DimensionMismatch("trajectory samples", p.size(), traj.size());
    const CostConfig& cc = p.cost;
    const ParameterPath path = p.path_for(control);
    const double dt = path.uniform_dt();
    const auto w = detail::trapezoid_weights(traj.times);
    const std::size_t n = traj.size();
    const CMatrix& theta = p.theta.matrix();

    const auto source = [&](std::size_t k) -> CVector {
        double coef = 2.0 * cc.w_running * w[k] * (traj.theta_values[k] - cc.theta_target);
        if (k + 1 == n) coef += 2.0 * cc.w_terminal * (traj.theta_values[k] - cc.theta_target);
        return coef * (theta * traj.states[k]);
    };

    AdjointTrajectory adj;
    adj.times = traj.times;
    adj.costates.resize(n);
    adj.costates[n - 1] = source(n - 1);
    for (std::size_t k = n - 1; k-- > 0;) {
        const ExactStep u(p.model.assemble(path.midpoint(k)), dt);
        adj.costates[k] = source(k) + u.apply_adjoint(adj.costates[k + 1]);
    }
    return adj;
}

/// dC/dE_k for every grid point.
inline std::vector<double> gradient(const ControlProblem& p, const Trajectory& traj, const AdjointTrajectory& adj,
                                    const std::vector<double>& control) {
    if (adj.costates.size() != traj.size()) {
        throw DimensionMismatch("costate samples", traj.size(), adj.costates.size());
    }
    const ParameterPath path = p.path_for(control);
    const double dt = path.uniform_dt();
    const auto w = detail::trapezoid_weights(traj.times);
    const std::size_t n = traj.size();
    const std::size_t ci = p.model.control_index();
    const HamiltonianTerm& ctrl = p.model.control_term();

    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = p.cost.w_fluence * w[k] * control[k];
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const RVector a = path.midpoint(j);
        const ExactStep u(p.model.assemble(a), dt);
        const double fprime = ctrl.coeff.derivative(a(static_cast<Eigen::Index>(ci)));
        const CVector du_psi = u.derivative_apply(fprime * ctrl.op.matrix(), traj.states[j]);
        const double dstep = 2.0 * adj.costates[j + 1].dot(du_psi).real();
        g[j] += 0.5 * dstep;
        g[j + 1] += 0.5 * dstep;
    }
    return g;
}

struct OptimizeOptions {
    std::size_t max_iters = 200;
    double step_size = 1.0;
    double tolerance = 1e-10;          ///< relative cost change for convergence
    double gradient_tolerance = 1e-12; ///< L2 norm of the function-space gradient
    double armijo = 1e-4;
    double backtrack = 0.5;
    std::size_t max_backtracks = 30;

    friend bool operator==(const OptimizeOptions&, const OptimizeOptions&) = default;
};

enum class OptimizeStatus { converged, max_iterations, stalled };

inline std::string_view to_string(OptimizeStatus s) {
    switch (s) {
        case OptimizeStatus::converged: return "converged";
        case OptimizeStatus::max_iterations: return "max_iterations";
        case OptimizeStatus::stalled: return "stalled";
    }
    return "unknown";
}

struct OptimizeResult {
    std::vector<double> control;
    std::vector<CostBreakdown> history;  ///< initial cost, then one entry per accepted step
    OptimizeStatus status = OptimizeStatus::converged;

    std::size_t accepted_iterations() const noexcept { return history.empty() ? 0 : history.size() - 1; }
};

/// Steepest descent in the L2 metric on the field with Armijo backtracking.
inline OptimizeResult optimize(const ControlProblem& p, std::vector<double> control, const OptimizeOptions& opts = {}) {
    p.validate();
    for (double e : control) {
        if (!std::isfinite(e)) throw InvalidArgument("initial control is not finite");
    }
    const auto w = detail::trapezoid_weights(p.system_path.times());

    OptimizeResult res;
    Trajectory traj = p.forward(control);
    CostBreakdown current = cost(traj, control, p.cost);
    res.history.push_back(current);
    double alpha = opts.step_size;
    res.status = OptimizeStatus::max_iterations;

    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        if (current.total == 0.0) {
            res.status = OptimizeStatus::converged;
            break;
        }
        const auto adj = adjoint_backward(p, traj, control);
        const auto g = gradient(p, traj, adj, control);
        std::vector<double> dir(g.size());
        double slope = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            dir[k] = w[k] > 0.0 ? -g[k] / w[k] : 0.0;
            slope += g[k] * dir[k];
        }
        if (std::sqrt(-slope) <= opts.gradient_tolerance) {
            res.status = OptimizeStatus::converged;
            break;
        }

        bool accepted = false;
        std::vector<double> trial(control.size());
        Trajectory trial_traj;
        CostBreakdown trial_cost;
        for (std::size_t b = 0; b <= opts.max_backtracks; ++b) {
            for (std::size_t k = 0; k < control.size(); ++k) trial[k] = control[k] + alpha * dir[k];
            trial_traj = p.forward(trial);
            trial_cost = cost(trial_traj, trial, p.cost);
            if (trial_cost.total < current.total &&
                trial_cost.total <= current.total + opts.armijo * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= opts.backtrack;
        }
        if (!accepted) {
            res.status = OptimizeStatus::stalled;
            break;
        }
        const double change = (current.total - trial_cost.total) / current.total;
        control = trial;
        traj = std::move(trial_traj);
        current = trial_cost;
        res.history.push_back(current);
        alpha *= 2.0;
        if (change < opts.tolerance) {
            res.status = OptimizeStatus::converged;
            break;
        }
    }
    res.control = std::move(control);
    return res;
}

}  // namespace qls
