#pragma once

// Scalar fields Phi(a1, a2) over a rectangular grid of two system
// parameters, labeled by a fixed value of the control parameter a3.

#include <qls/errors.hpp>
#include <qls/hamiltonian.hpp>
#include <qls/operators.hpp>
#include <qls/propagator.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace qls::levelset {

struct Point {
    double a1 = 0.0;
    double a2 = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

enum class MeshStatistic { terminal, window_average };

inline std::string_view to_string(MeshStatistic s) {
    return s == MeshStatistic::terminal ? "terminal" : "window_average";
}

enum class InterpolationKind { bilinear, bicubic };

struct ParameterMesh {
    std::vector<double> axis1;
    std::vector<double> axis2;
    double control_label = 0.0;
    RMatrix values;  ///< values(i, j) = Phi(axis1[i], axis2[j])
    MeshStatistic statistic = MeshStatistic::terminal;

    void validate() const {
        const auto increasing = [](const std::vector<double>& ax, const char* name) {
            if (ax.empty()) throw InvalidArgument(std::string(name) + " is empty");
            for (std::size_t k = 1; k < ax.size(); ++k) {
                if (!(ax[k] > ax[k - 1])) throw InvalidArgument(std::string(name) + " is not strictly increasing");
            }
        };
        increasing(axis1, "axis1");
        increasing(axis2, "axis2");
        if (static_cast<std::size_t>(values.rows()) != axis1.size() ||
            static_cast<std::size_t>(values.cols()) != axis2.size()) {
            throw InvalidArgument("mesh values do not match axes");
        }
        if (!values.allFinite()) throw InvalidArgument("mesh values are not finite");
    }

    bool contains(const Point& p) const {
        return p.a1 >= axis1.front() && p.a1 <= axis1.back() && p.a2 >= axis2.front() && p.a2 <= axis2.back();
    }
};

/// Evenly spaced axis of `count` points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count == 0) throw InvalidArgument("axis needs at least one point");
    if (count == 1) return {lo};
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) {
        v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    v.back() = hi;
    return v;
}

/// Maps (a1, a2, a3, t) to the full parameter vector of the model.
struct ProtocolTemplate {
    double duration = 1.0;
    std::size_t steps = 100;
    std::function<RVector(double a1, double a2, double a3, double t)> parameters;
};

struct MeshOptions {
    MeshStatistic statistic = MeshStatistic::terminal;
    double window = 0.0;  ///< averaging window for window_average
    unsigned threads = 1;
};

/// Phi of one propagated trajectory under the chosen statistic.
inline double trajectory_statistic(const Trajectory& traj, MeshStatistic statistic, double window) {
    if (statistic == MeshStatistic::terminal || traj.size() < 2) return traj.theta_values.back();
    const double t_end = traj.times.back();
    const double start = t_end - window;
    double acc = 0.0;
    double span = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        if (traj.times[k] < start - 1e-12 * std::max(1.0, std::abs(t_end))) continue;
        const double h = traj.times[k + 1] - traj.times[k];
        acc += 0.5 * h * (traj.theta_values[k] + traj.theta_values[k + 1]);
        span += h;
    }
    if (span <= 0.0) return traj.theta_values.back();
    return acc / span;
}

/// One propagation per node. Nodes are evaluated on `opts.threads` workers
/// into pre-sized slots, so the result does not depend on scheduling. Any
/// failed node fails the whole mesh.
inline ParameterMesh evaluate_mesh(const ParameterizedHamiltonian& model, const ProtocolTemplate& tmpl,
                                   const State& psi0, const HermitianOperator& theta,
                                   const std::vector<double>& axis1, const std::vector<double>& axis2, double a3,
                                   const MeshOptions& opts = {}) {
    if (!tmpl.parameters) throw InvalidArgument("protocol template has no parameter function");
    if (opts.statistic == MeshStatistic::window_average && !(opts.window > 0.0 && opts.window <= tmpl.duration)) {
        throw InvalidArgument("averaging window must lie in (0, duration]");
    }
    ParameterMesh mesh;
    mesh.axis1 = axis1;
    mesh.axis2 = axis2;
    mesh.control_label = a3;
    mesh.statistic = opts.statistic;
    mesh.values = RMatrix::Zero(static_cast<Eigen::Index>(axis1.size()), static_cast<Eigen::Index>(axis2.size()));

    const std::vector<double> times = ParameterPath::uniform_times(tmpl.duration, tmpl.steps);
    const std::size_t n2 = axis2.size();
    const std::size_t nodes = axis1.size() * n2;
    std::vector<std::exception_ptr> failures(nodes);

    const auto node = [&](std::size_t idx) {
        const std::size_t i = idx / n2;
        const std::size_t j = idx % n2;
        RMatrix values(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(model.n_params()));
        for (std::size_t k = 0; k < times.size(); ++k) {
            values.row(static_cast<Eigen::Index>(k)) = tmpl.parameters(axis1[i], axis2[j], a3, times[k]).transpose();
        }
        const ParameterPath path(times, std::move(values));
        const Trajectory traj = propagate(model, path, psi0, theta);
        const double phi = trajectory_statistic(traj, opts.statistic, opts.window);
        if (!std::isfinite(phi)) throw NumericalError("non-finite Phi");
        mesh.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = phi;
    };

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t idx = next++; idx < nodes; idx = next++) {
            try {
                node(idx);
            } catch (...) {
                failures[idx] = std::current_exception();
            }
        }
    };
    const unsigned nthreads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(nodes)));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t idx = 0; idx < nodes; ++idx) {
        if (!failures[idx]) continue;
        std::string what = "unknown error";
        try {
            std::rethrow_exception(failures[idx]);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        throw NumericalError("mesh node (" + std::to_string(idx / n2) + ", " + std::to_string(idx % n2) +
                             ") at a3 = " + std::to_string(a3) + " failed: " + what);
    }
    return mesh;
}

/// Cubic spline with not-a-knot end conditions. The node slopes are a
/// linear function of the data, slopes = S y, with S depending only on the
/// knots.
class NotAKnotSpline {
public:
    explicit NotAKnotSpline(std::vector<double> knots) : x_(std::move(knots)) { slope_op_ = slope_operator(x_); }

    const std::vector<double>& knots() const noexcept { return x_; }

    RVector slopes(const RVector& y) const { return slope_op_ * y; }

    /// Cubic Hermite evaluation given data and node slopes.
    double evaluate(const RVector& y, const RVector& s, double t) const {
        const std::size_t n = x_.size();
        if (n == 1) return y(0);
        const std::size_t i = segment(t);
        const double h = x_[i + 1] - x_[i];
        const double u = (t - x_[i]) / h;
        const double u2 = u * u;
        const double u3 = u2 * u;
        const auto ii = static_cast<Eigen::Index>(i);
        return (2 * u3 - 3 * u2 + 1) * y(ii) + (u3 - 2 * u2 + u) * h * s(ii) + (-2 * u3 + 3 * u2) * y(ii + 1) +
               (u3 - u2) * h * s(ii + 1);
    }

    double operator()(const RVector& y, double t) const { return evaluate(y, slopes(y), t); }

    static RMatrix slope_operator(const std::vector<double>& x) {
        const std::size_t n = x.size();
        const auto N = static_cast<Eigen::Index>(n);
        if (n == 1) return RMatrix::Zero(1, 1);
        if (n == 2) {
            const double h = x[1] - x[0];
            RMatrix s(2, 2);
            s << -1 / h, 1 / h, -1 / h, 1 / h;
            return s;
        }
        if (n == 3) {
            // The parabola through three points.
            RMatrix s(3, 3);
            for (int r = 0; r < 3; ++r) {
                for (int j = 0; j < 3; ++j) {
                    // derivative of the j-th Lagrange basis polynomial at x[r]
                    double d = 0.0;
                    for (int m = 0; m < 3; ++m) {
                        if (m == j) continue;
                        double term = 1.0 / (x[j] - x[m]);
                        for (int q = 0; q < 3; ++q) {
                            if (q == j || q == m) continue;
                            term *= (x[r] - x[q]) / (x[j] - x[q]);
                        }
                        d += term;
                    }
                    s(r, j) = d;
                }
            }
            return s;
        }
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];
        // divided differences delta = D y
        RMatrix dmat = RMatrix::Zero(N - 1, N);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            dmat(r, r) = -1.0 / h[i];
            dmat(r, r + 1) = 1.0 / h[i];
        }
        RMatrix a = RMatrix::Zero(N, N);
        RMatrix rhs = RMatrix::Zero(N, N - 1);  // right-hand side = rhs * delta
        {
            const double x31 = h[0] + h[1];
            a(0, 0) = h[1];
            a(0, 1) = x31;
            rhs(0, 0) = (h[0] + 2.0 * x31) * h[1] / x31;
            rhs(0, 1) = h[0] * h[0] / x31;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            a(r, r - 1) = h[i];
            a(r, r) = 2.0 * (h[i - 1] + h[i]);
            a(r, r + 1) = h[i - 1];
            rhs(r, r - 1) = 3.0 * h[i];
            rhs(r, r) = 3.0 * h[i - 1];
        }
        {
            const double xn = h[n - 3] + h[n - 2];
            a(N - 1, N - 2) = xn;
            a(N - 1, N - 1) = h[n - 3];
            rhs(N - 1, N - 3) = h[n - 2] * h[n - 2] / xn;
            rhs(N - 1, N - 2) = (2.0 * xn + h[n - 2]) * h[n - 3] / xn;
        }
        return a.partialPivLu().solve(rhs * dmat);
    }

private:
    std::size_t segment(double t) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), t);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        return std::min(i, x_.size() - 2);
    }

    std::vector<double> x_;
    RMatrix slope_op_;
};

/// Reusable interpolant over one mesh.
class MeshInterpolator {
public:
    MeshInterpolator(const ParameterMesh& mesh, InterpolationKind kind)
        : mesh_(&mesh), kind_(kind), spline1_(mesh.axis1), spline2_(mesh.axis2) {
        mesh.validate();
        if (kind_ == InterpolationKind::bicubic) {
            row_slopes_ = mesh.values * NotAKnotSpline::slope_operator(mesh.axis2).transpose();
        }
    }

    double operator()(const Point& p) const {
        const Point q = clamp_checked(p);
        return kind_ == InterpolationKind::bilinear ? bilinear(q) : bicubic(q);
    }

    bool contains(const Point& p) const {
        const auto tol = [](const std::vector<double>& ax) {
            return 1e-12 * std::max(1.0, std::max(std::abs(ax.front()), std::abs(ax.back())));
        };
        return p.a1 >= mesh_->axis1.front() - tol(mesh_->axis1) && p.a1 <= mesh_->axis1.back() + tol(mesh_->axis1) &&
               p.a2 >= mesh_->axis2.front() - tol(mesh_->axis2) && p.a2 <= mesh_->axis2.back() + tol(mesh_->axis2);
    }

    const ParameterMesh& mesh() const noexcept { return *mesh_; }
    InterpolationKind kind() const noexcept { return kind_; }

private:
    Point clamp_checked(const Point& p) const {
        if (!contains(p)) {
            throw InvalidArgument("point (" + std::to_string(p.a1) + ", " + std::to_string(p.a2) +
                                  ") is outside the mesh");
        }
        return {std::clamp(p.a1, mesh_->axis1.front(), mesh_->axis1.back()),
                std::clamp(p.a2, mesh_->axis2.front(), mesh_->axis2.back())};
    }

    static void locate(const std::vector<double>& ax, double x, std::size_t& i, double& t) {
        if (ax.size() == 1) {
            i = 0;
            t = 0.0;
            return;
        }
        auto it = std::upper_bound(ax.begin(), ax.end(), x);
        i = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
        i = std::min(i, ax.size() - 2);
        t = (x - ax[i]) / (ax[i + 1] - ax[i]);
    }

    double bilinear(const Point& p) const {
        std::size_t i, j;
        double u, v;
        locate(mesh_->axis1, p.a1, i, u);
        locate(mesh_->axis2, p.a2, j, v);
        const RMatrix& f = mesh_->values;
        const auto r = static_cast<Eigen::Index>(i);
        const auto c = static_cast<Eigen::Index>(j);
        const auto r1 = mesh_->axis1.size() > 1 ? r + 1 : r;
        const auto c1 = mesh_->axis2.size() > 1 ? c + 1 : c;
        return (1 - u) * (1 - v) * f(r, c) + u * (1 - v) * f(r1, c) + (1 - u) * v * f(r, c1) + u * v * f(r1, c1);
    }

    double bicubic(const Point& p) const {
        const auto n1 = static_cast<Eigen::Index>(mesh_->axis1.size());
        RVector column(n1);
        for (Eigen::Index i = 0; i < n1; ++i) {
            column(i) = spline2_.evaluate(mesh_->values.row(i).transpose(), row_slopes_.row(i).transpose(), p.a2);
        }
        return spline1_(column, p.a1);
    }

    const ParameterMesh* mesh_;
    InterpolationKind kind_;
    NotAKnotSpline spline1_;
    NotAKnotSpline spline2_;
    RMatrix row_slopes_;
};

inline double interpolate(const ParameterMesh& mesh, const Point& p,
                          InterpolationKind kind = InterpolationKind::bilinear) {
    return MeshInterpolator(mesh, kind)(p);
}

/// Gradient of the interpolant by central differences at half the local
/// grid spacing; one-sided differences where the stencil leaves the mesh.
inline std::array<double, 2> mesh_gradient(const ParameterMesh& mesh, const Point& p,
                                           InterpolationKind kind = InterpolationKind::bicubic) {
    const MeshInterpolator f(mesh, kind);
    if (!f.contains(p)) throw InvalidArgument("gradient point is outside the mesh");
    const auto spacing = [](const std::vector<double>& ax, double x) {
        auto it = std::upper_bound(ax.begin(), ax.end(), x);
        std::size_t i = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
        i = std::min(i, ax.size() - 2);
        return ax[i + 1] - ax[i];
    };
    const auto partial = [&](const std::vector<double>& ax, double x, auto at) -> double {
        if (ax.size() < 2) return 0.0;
        const double s = 0.5 * spacing(ax, x);
        const bool fwd = x + s <= ax.back();
        const bool bwd = x - s >= ax.front();
        if (fwd && bwd) return (at(x + s) - at(x - s)) / (2.0 * s);
        if (fwd) return (at(x + s) - at(x)) / s;
        return (at(x) - at(x - s)) / s;
    };
    const double g1 = partial(mesh.axis1, p.a1, [&](double x) { return f({x, p.a2}); });
    const double g2 = partial(mesh.axis2, p.a2, [&](double y) { return f({p.a1, y}); });
    return {g1, g2};
}

}  // namespace qls::levelset
