#pragma once

// Moving between level sets: the control value a3(t) that keeps Phi on a
// level while the system parameters drift, and the stationarity condition
// of the cost functional over a family of meshes labeled by a3.

#include <qls/errors.hpp>
#include <qls/levelset/mesh.hpp>
#include <qls/oct.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace qls::levelset {

namespace detail {

inline void check_family(const std::vector<ParameterMesh>& family, std::size_t min_size) {
    if (family.size() < min_size) {
        throw InvalidArgument("mesh family needs at least " + std::to_string(min_size) + " labels, got " +
                              std::to_string(family.size()));
    }
    for (std::size_t k = 0; k < family.size(); ++k) {
        family[k].validate();
        if (k > 0) {
            if (!(family[k].control_label > family[k - 1].control_label)) {
                throw InvalidArgument("mesh family labels must be strictly increasing");
            }
            if (family[k].axis1 != family[0].axis1 || family[k].axis2 != family[0].axis2) {
                throw InvalidArgument("mesh family axes differ between labels");
            }
        }
    }
}

}  // namespace detail

struct FollowOptions {
    InterpolationKind kind = InterpolationKind::bilinear;
    double tolerance = 1e-10;  ///< in Phi
};

/// For every sample of the system path, the a3 with Phi(a1, a2; a3) = c,
/// using Phi linear in a3 between adjacent labels. The lowest bracketing
/// label interval wins; a label whose value equals c exactly is returned as
/// is. Throws NoBracket when Phi - c does not change sign across the family.
inline std::vector<double> follow_level(const std::vector<ParameterMesh>& family, const std::vector<Point>& path,
                                        double c, const FollowOptions& opts = {}) {
    detail::check_family(family, 1);
    std::vector<MeshInterpolator> interp;
    interp.reserve(family.size());
    for (const auto& m : family) interp.emplace_back(m, opts.kind);

    std::vector<double> out;
    out.reserve(path.size());
    std::vector<double> phi(family.size());
    for (std::size_t s = 0; s < path.size(); ++s) {
        for (std::size_t j = 0; j < family.size(); ++j) phi[j] = interp[j](path[s]);

        std::size_t bracket = family.size();
        bool exact = false;
        for (std::size_t j = 0; j < family.size(); ++j) {
            if (phi[j] == c) {
                bracket = j;
                exact = true;
                break;
            }
            if (j + 1 < family.size() && (phi[j] - c) * (phi[j + 1] - c) < 0.0) {
                bracket = j;
                break;
            }
        }
        if (bracket == family.size()) {
            const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
            throw NoBracket(s, *lo, *hi, c);
        }
        if (exact) {
            out.push_back(family[bracket].control_label);
            continue;
        }

        const double l0 = family[bracket].control_label;
        const double l1 = family[bracket + 1].control_label;
        const double f0 = phi[bracket];
        const double f1 = phi[bracket + 1];
        const auto g = [&](double a3) { return f0 + (f1 - f0) * (a3 - l0) / (l1 - l0) - c; };

        double lo = l0, hi = l1;
        double glo = g(lo);
        double x = 0.5 * (lo + hi);
        for (int it = 0; it < 8; ++it) {
            x = 0.5 * (lo + hi);
            const double gx = g(x);
            if ((gx < 0.0) == (glo < 0.0)) {
                lo = x;
                glo = gx;
            } else {
                hi = x;
            }
        }
        // secant polish inside the bracket
        double x0 = lo, x1 = hi;
        double g0 = g(x0), g1 = g(x1);
        x = x1;
        for (int it = 0; it < 50 && std::abs(g1) > opts.tolerance; ++it) {
            if (g1 == g0) break;
            const double x2 = std::clamp(x1 - g1 * (x1 - x0) / (g1 - g0), l0, l1);
            x0 = x1;
            g0 = g1;
            x1 = x2;
            g1 = g(x1);
            x = x1;
        }
        if (std::abs(g(x)) > opts.tolerance) throw NumericalError("follow_level root did not converge");
        out.push_back(x);
    }
    return out;
}

/// Cost of the parameters themselves: 1/2 w_c a3^2 (fluence form) plus
/// optional quadratic penalties on the system parameters.
struct SurfaceCost {
    double w_control = 1.0;
    double w_a1 = 0.0;
    double w_a2 = 0.0;
    double ref_a1 = 0.0;
    double ref_a2 = 0.0;

    double operator()(double a1, double a2, double a3) const {
        return 0.5 * w_control * a3 * a3 + 0.5 * w_a1 * (a1 - ref_a1) * (a1 - ref_a1) +
               0.5 * w_a2 * (a2 - ref_a2) * (a2 - ref_a2);
    }

    friend bool operator==(const SurfaceCost&, const SurfaceCost&) = default;
};

inline ParameterMesh cost_surface(const std::vector<double>& axis1, const std::vector<double>& axis2, double a3,
                                  const SurfaceCost& h) {
    ParameterMesh m;
    m.axis1 = axis1;
    m.axis2 = axis2;
    m.control_label = a3;
    m.values.resize(static_cast<Eigen::Index>(axis1.size()), static_cast<Eigen::Index>(axis2.size()));
    for (std::size_t i = 0; i < axis1.size(); ++i) {
        for (std::size_t j = 0; j < axis2.size(); ++j) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h(axis1[i], axis2[j], a3);
        }
    }
    m.validate();
    return m;
}

namespace detail {

/// Three-point derivative at the middle of (possibly uneven) labels.
inline RMatrix label_derivative(const std::vector<ParameterMesh>& family, std::size_t j) {
    const double hm = family[j].control_label - family[j - 1].control_label;
    const double hp = family[j + 1].control_label - family[j].control_label;
    return (-hp / (hm * (hm + hp))) * family[j - 1].values + ((hp - hm) / (hm * hp)) * family[j].values +
           (hm / (hp * (hm + hp))) * family[j + 1].values;
}

}  // namespace detail

/// r(a1, a2) = g'(Phi) dPhi/da3 + dh/da3 at interior label `index`, with
/// g(Phi) = w_running (Phi - theta_target)^2. Its zero level set is where
/// the a3-derivative of the running-plus-parameter cost vanishes.
inline ParameterMesh stationarity_residual(const std::vector<ParameterMesh>& theta_family,
                                           const std::vector<ParameterMesh>& cost_family, std::size_t index,
                                           const CostConfig& cc) {
    detail::check_family(theta_family, 3);
    detail::check_family(cost_family, 3);
    if (cost_family.size() != theta_family.size()) {
        throw InvalidArgument("theta and cost families have different label counts");
    }
    for (std::size_t k = 0; k < theta_family.size(); ++k) {
        if (theta_family[k].control_label != cost_family[k].control_label ||
            theta_family[k].axis1 != cost_family[k].axis1 || theta_family[k].axis2 != cost_family[k].axis2) {
            throw InvalidArgument("theta and cost families are not on the same grid");
        }
    }
    if (index == 0 || index + 1 >= theta_family.size()) {
        throw InvalidArgument("stationarity residual needs an interior label");
    }
    const RMatrix dphi = detail::label_derivative(theta_family, index);
    const RMatrix dh = detail::label_derivative(cost_family, index);
    const RMatrix gprime =
        (2.0 * cc.w_running) * (theta_family[index].values.array() - cc.theta_target).matrix();

    ParameterMesh r;
    r.axis1 = theta_family[index].axis1;
    r.axis2 = theta_family[index].axis2;
    r.control_label = theta_family[index].control_label;
    r.statistic = theta_family[index].statistic;
    r.values = (gprime.array() * dphi.array() + dh.array()).matrix();
    return r;
}

/// Residual meshes at every interior label.
inline std::vector<ParameterMesh> stationarity_family(const std::vector<ParameterMesh>& theta_family,
                                                      const std::vector<ParameterMesh>& cost_family,
                                                      const CostConfig& cc) {
    std::vector<ParameterMesh> out;
    for (std::size_t j = 1; j + 1 < theta_family.size(); ++j) {
        out.push_back(stationarity_residual(theta_family, cost_family, j, cc));
    }
    return out;
}

}  // namespace qls::levelset
