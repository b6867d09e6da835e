#pragma once

// Level-set tracking control: choose the control parameter at every instant
// so that d<Theta>/dt = 0 while the system parameters follow a prescribed
// path, plus the tolerance-band analysis of a nearly constant <Theta>.

#include <qls/errors.hpp>
#include <qls/hamiltonian.hpp>
#include <qls/operators.hpp>
#include <qls/propagator.hpp>

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace qls {

/// d<Theta>/dt = i <psi|[H, Theta]|psi> for i dpsi/dt = H psi.
inline double theta_dot(const State& psi, const HermitianOperator& h, const HermitianOperator& theta) {
    return expectation(i_commutator(h, theta), psi);
}

struct LevelSetRates {
    double theta_o = 0.0;  ///< rate of <Theta> under H with the control zeroed
    RVector theta_a;       ///< <i[dH/da_i, Theta]> for every parameter
};

inline LevelSetRates level_set_rates(const ParameterizedHamiltonian& model, const RVector& a, const State& psi,
                                     const HermitianOperator& theta) {
    LevelSetRates r;
    r.theta_o = theta_dot(psi, model.assemble_without_control(a), theta);
    r.theta_a.resize(static_cast<Eigen::Index>(model.n_params()));
    for (std::size_t i = 0; i < model.n_params(); ++i) {
        r.theta_a(static_cast<Eigen::Index>(i)) = expectation(model.theta_a_op(a, theta, i), psi);
    }
    return r;
}

struct SolveControlOptions {
    /// Absolute threshold on |i<[V_c, Theta]>|; default 1e-8 |Theta| |V_c|.
    std::optional<double> singular_threshold;
    /// Search bracket for controls entering nonlinearly.
    double bracket_lo = -10.0;
    double bracket_hi = 10.0;
};

/// Sensitivity of d<Theta>/dt to the control parameter at the given state.
inline double control_sensitivity(const ParameterizedHamiltonian& model, const RVector& a, const State& psi,
                                  const HermitianOperator& theta) {
    return expectation(model.theta_a_op(a, theta, model.control_index()), psi);
}

/// Solve the instantaneous level-set condition d<Theta>/dt = 0 for the
/// control parameter. The control entry of `a` is ignored except as the
/// evaluation point of f' for nonlinear controls.
inline double solve_control(const ParameterizedHamiltonian& model, RVector a, const State& psi,
                            const HermitianOperator& theta, const SolveControlOptions& opts = {}) {
    const auto c = static_cast<Eigen::Index>(model.control_index());
    const HamiltonianTerm& ctrl = model.control_term();
    const double numerator = theta_dot(psi, model.assemble_without_control(a), theta);
    const double coupling = expectation(i_commutator(ctrl.op, theta), psi);
    const double threshold = opts.singular_threshold.value_or(
        1e-8 * theta.spectral_norm() * std::abs(ctrl.coeff.scale) * ctrl.op.spectral_norm());

    if (ctrl.coeff.is_linear()) {
        const double denominator = ctrl.coeff.scale * coupling;
        if (!(std::abs(denominator) >= threshold) || denominator == 0.0) {
            throw SingularControl(denominator);
        }
        return -numerator / denominator;
    }

    // Nonlinear f_c: bisection on the rate over the configured bracket.
    if (!(std::abs(coupling * ctrl.coeff.scale) >= threshold) || coupling == 0.0) {
        throw SingularControl(coupling * ctrl.coeff.scale);
    }
    const auto rate = [&](double x) {
        a(c) = x;
        return theta_dot(psi, model.assemble(a), theta);
    };
    double lo = opts.bracket_lo;
    double hi = opts.bracket_hi;
    double flo = rate(lo);
    const double fhi = rate(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) {
        throw SingularControl(coupling * ctrl.coeff.scale, "no root of d<Theta>/dt in control bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = rate(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct TrackOptions {
    SolveControlOptions solve;
    /// Steps whose achieved |d<Theta>/dt| exceeds this are listed in warnings.
    double residual_tolerance = 1e-3;
};

struct TrackingAbort {
    std::size_t step = 0;
    double denominator = 0.0;
    std::string message;
};

struct TrackingResult {
    /// Control value applied over [t_k, t_{k+1}); the last entry repeats the
    /// previous one.
    std::vector<double> control_values;
    Trajectory trajectory;
    std::vector<LevelSetRates> rates;
    /// |<Theta>(t_{k+1}) - <Theta>(t_k)| / dt, zero at the final point.
    std::vector<double> residuals;
    std::vector<std::size_t> warnings;
    std::optional<TrackingAbort> aborted;

    bool completed() const noexcept { return !aborted.has_value(); }
};

/// Hold <Theta> at its initial value while the system parameters follow
/// `system_path`. Each interval uses a predictor half step under the
/// instantaneous control law, re-solves the law at the midpoint, and
/// advances with the midpoint Hamiltonian. The result can be replayed
/// exactly through propagate() with a held control column.
inline TrackingResult track(const ParameterizedHamiltonian& model, const ParameterPath& system_path,
                            const State& psi0, const HermitianOperator& theta, const TrackOptions& opts = {}) {
    check_model_inputs(model, system_path, psi0, theta);
    const double dt = system_path.uniform_dt();
    const auto c = static_cast<Eigen::Index>(model.control_index());

    TrackingResult out;
    CVector psi = psi0.amplitudes();
    out.trajectory.push(system_path.times().front(), psi, theta);
    std::optional<double> previous_denominator;

    const auto finish_point = [&](std::size_t k, const CVector& v) {
        RVector a = system_path.at(k);
        a(c) = out.control_values.empty() ? 0.0 : out.control_values.back();
        out.rates.push_back(level_set_rates(model, a, State::normalized(v), theta));
    };

    for (std::size_t k = 0; k < system_path.steps(); ++k) {
        const State here = State::normalized(psi);
        RVector a_now = system_path.at(k);
        RVector a_mid = system_path.midpoint(k);
        double control = 0.0;
        try {
            const double predictor = solve_control(model, a_now, here, theta, opts.solve);
            a_now(c) = predictor;
            const State half(detail::advance(psi, model.assemble(a_now), 0.5 * dt, StepMethod::exact));
            const double denominator = model.control_term().coeff.scale *
                                       expectation(i_commutator(model.control_term().op, theta), half);
            if (previous_denominator && (denominator < 0.0) != (*previous_denominator < 0.0)) {
                throw SingularControl(denominator, "sensitivity changed sign");
            }
            previous_denominator = denominator;
            control = solve_control(model, a_mid, half, theta, opts.solve);
        } catch (const SingularControl& e) {
            out.aborted = TrackingAbort{k, e.denominator(), e.what()};
            finish_point(k, psi);
            out.control_values.push_back(out.control_values.empty() ? 0.0 : out.control_values.back());
            out.residuals.push_back(0.0);
            return out;
        }
        finish_point(k, psi);
        out.control_values.push_back(control);

        a_mid(c) = control;
        psi = ExactStep(model.assemble(a_mid), dt).apply(psi);
        out.trajectory.push(system_path.times()[k + 1], psi, theta);
        const double residual =
            std::abs(out.trajectory.theta_values[k + 1] - out.trajectory.theta_values[k]) / dt;
        out.residuals.push_back(residual);
        if (residual > opts.residual_tolerance) out.warnings.push_back(k);
    }
    finish_point(system_path.steps(), psi);
    out.control_values.push_back(out.control_values.empty() ? 0.0 : out.control_values.back());
    out.residuals.push_back(0.0);
    return out;
}

/// Copy of `system_path` whose control column carries the tracked field with
/// hold interpolation, suitable for propagate().
inline ParameterPath replay_path(const ParameterizedHamiltonian& model, const ParameterPath& system_path,
                                 const TrackingResult& result) {
    const std::size_t n = result.control_values.size();
    std::vector<double> times(system_path.times().begin(),
                              system_path.times().begin() + static_cast<std::ptrdiff_t>(n));
    RMatrix values = system_path.values().topRows(static_cast<Eigen::Index>(n));
    ParameterPath path(std::move(times), std::move(values));
    path.set_column(model.control_index(),
                    Eigen::Map<const RVector>(result.control_values.data(), static_cast<Eigen::Index>(n)));
    path.set_interpolation(model.control_index(), PathInterpolation::hold);
    return path;
}

/// The three time scales: carrier period, pulse duration, observation window.
struct TimescaleConfig {
    double t0 = 0.0;
    double pulse_duration = 0.0;
    double observation_window = 0.0;

    void validate() const {
        if (!(t0 > 0.0)) throw InvalidArgument("timescale t0 must be positive");
        if (!(t0 <= pulse_duration && pulse_duration <= observation_window)) {
            throw InvalidArgument("timescales must satisfy t0 <= pulse_duration <= observation_window");
        }
    }
};

struct ToleranceBandReport {
    double theta_mean = 0.0;
    double theta_amplitude = 0.0;
    double fitted_omega = 0.0;
    double ratio = 0.0;
    bool within_band = true;
};

namespace detail {

struct SinusoidFit {
    double offset = 0.0;
    double sin_coef = 0.0;
    double cos_coef = 0.0;
    double sse = 0.0;
};

/// Least squares r(t) ~ C + A sin(w t) + B cos(w t).
inline SinusoidFit fit_sinusoid(const std::vector<double>& t, const std::vector<double>& r, double omega) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Eigen::Vector3d row(1.0, std::sin(omega * t[k]), std::cos(omega * t[k]));
        ata += row * row.transpose();
        atb += row * r[k];
    }
    const Eigen::Vector3d x = ata.ldlt().solve(atb);
    SinusoidFit fit{x(0), x(1), x(2), 0.0};
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double e = r[k] - (x(0) + x(1) * std::sin(omega * t[k]) + x(2) * std::cos(omega * t[k]));
        fit.sse += e * e;
    }
    return fit;
}

}  // namespace detail

/// Decompose <Theta>(t) as mean + amplitude sin(omega t) and test the
/// relative oscillation against `band`. The mean is the average of the
/// moving average over the observation window; the oscillation is a
/// least-squares single-sinusoid fit of the remainder, seeded at the
/// dominant DFT peak and refined by a golden-section frequency scan.
inline ToleranceBandReport tolerance_band(const Trajectory& traj, const TimescaleConfig& ts, double band) {
    ts.validate();
    const std::size_t n = traj.size();
    if (n < 3) throw InvalidArgument("trajectory too short for tolerance-band analysis");
    const double span = traj.times.back() - traj.times.front();
    if (ts.observation_window > span * (1.0 + 1e-12)) {
        throw InvalidArgument("observation window longer than trajectory");
    }
    const double dt = span / static_cast<double>(n - 1);
    const auto& theta = traj.theta_values;

    // Moving average over a centered window of w samples.
    std::size_t w = static_cast<std::size_t>(std::llround(ts.observation_window / dt)) + 1;
    w = std::clamp<std::size_t>(w, 1, n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + theta[k];
    double mean_acc = 0.0;
    for (std::size_t s = 0; s + w <= n; ++s) mean_acc += (prefix[s + w] - prefix[s]) / static_cast<double>(w);
    ToleranceBandReport rep;
    rep.theta_mean = mean_acc / static_cast<double>(n - w + 1);

    std::vector<double> t(n);
    std::vector<double> resid(n);
    double max_resid = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = traj.times[k] - traj.times.front();
        resid[k] = theta[k] - rep.theta_mean;
        max_resid = std::max(max_resid, std::abs(resid[k]));
    }

    const double floor = 1e-13 * std::max(1.0, std::abs(rep.theta_mean));
    if (max_resid > floor) {
        // Dominant nonzero frequency of the mean-removed signal.
        const double resid_mean = std::accumulate(resid.begin(), resid.end(), 0.0) / static_cast<double>(n);
        std::vector<double> centered(n);
        for (std::size_t k = 0; k < n; ++k) centered[k] = resid[k] - resid_mean;
        Eigen::FFT<double> fft;
        std::vector<std::complex<double>> spectrum;
        fft.fwd(spectrum, centered);
        std::size_t peak = 1;
        for (std::size_t j = 1; j <= n / 2; ++j) {
            if (std::abs(spectrum[j]) > std::abs(spectrum[peak])) peak = j;
        }
        const double total = dt * static_cast<double>(n);
        const double omega_peak = 2.0 * M_PI * static_cast<double>(peak) / total;
        const double dw = 2.0 * M_PI / total;

        double lo = std::max(0.5 * dw, omega_peak - dw);
        double hi = omega_peak + dw;
        const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - golden * (hi - lo);
        double x2 = lo + golden * (hi - lo);
        double f1 = detail::fit_sinusoid(t, resid, x1).sse;
        double f2 = detail::fit_sinusoid(t, resid, x2).sse;
        while (hi - lo > 1e-10 * hi) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - golden * (hi - lo);
                f1 = detail::fit_sinusoid(t, resid, x1).sse;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + golden * (hi - lo);
                f2 = detail::fit_sinusoid(t, resid, x2).sse;
            }
        }
        rep.fitted_omega = 0.5 * (lo + hi);
        const auto fit = detail::fit_sinusoid(t, resid, rep.fitted_omega);
        rep.theta_amplitude = std::hypot(fit.sin_coef, fit.cos_coef);
    }

    if (rep.theta_mean != 0.0) {
        rep.ratio = rep.theta_amplitude / std::abs(rep.theta_mean);
    } else {
        rep.ratio = rep.theta_amplitude > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    rep.within_band = rep.ratio <= band;
    return rep;
}

}  // namespace qls
