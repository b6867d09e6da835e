#pragma once

// Parameterized Hamiltonians H(a) = H0 + sum_i f_i(a_i) V_i with one
// designated control term, and time courses a(t) of their parameters.

#include <qls/errors.hpp>
#include <qls/operators.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qls {

/// Scalar coefficient function f(a) from a closed catalog.
struct Coefficient {
    enum class Kind { linear, quadratic };

    Kind kind = Kind::linear;
    double scale = 1.0;

    static Coefficient linear(double s = 1.0) { return {Kind::linear, s}; }
    static Coefficient quadratic(double s = 1.0) { return {Kind::quadratic, s}; }

    double value(double a) const {
        switch (kind) {
            case Kind::linear: return scale * a;
            case Kind::quadratic: return scale * a * a;
        }
        return 0.0;
    }

    double derivative(double a) const {
        switch (kind) {
            case Kind::linear: return scale;
            case Kind::quadratic: return 2.0 * scale * a;
        }
        return 0.0;
    }

    bool is_linear() const noexcept { return kind == Kind::linear; }

    friend bool operator==(const Coefficient&, const Coefficient&) = default;
};

inline std::string_view to_string(Coefficient::Kind k) {
    return k == Coefficient::Kind::linear ? "linear" : "quadratic";
}

enum class TermRole { system, control };

struct HamiltonianTerm {
    std::string name;
    HermitianOperator op;
    Coefficient coeff;
    TermRole role = TermRole::system;
};

class ParameterizedHamiltonian {
public:
    /// Exactly one term must carry TermRole::control.
    ParameterizedHamiltonian(HermitianOperator base, std::vector<HamiltonianTerm> terms)
        : base_(std::move(base)), terms_(std::move(terms)) {
        std::optional<std::size_t> control;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (terms_[i].op.dim() != base_.dim()) {
                throw DimensionMismatch("term '" + terms_[i].name + "'", base_.dim(), terms_[i].op.dim());
            }
            if (terms_[i].role == TermRole::control) {
                if (control) throw InvalidArgument("more than one control term");
                control = i;
            }
        }
        if (!control) throw InvalidArgument("model has no control term");
        control_index_ = *control;
    }

    const HermitianOperator& base() const noexcept { return base_; }
    const std::vector<HamiltonianTerm>& terms() const noexcept { return terms_; }
    const HamiltonianTerm& term(std::size_t i) const { return terms_.at(i); }
    std::size_t n_params() const noexcept { return terms_.size(); }
    std::size_t control_index() const noexcept { return control_index_; }
    const HamiltonianTerm& control_term() const { return terms_[control_index_]; }
    std::size_t dim() const noexcept { return base_.dim(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (terms_[i].name == name) return i;
        }
        return std::nullopt;
    }

    HermitianOperator assemble(const RVector& a) const {
        check_params(a);
        CMatrix h = base_.matrix();
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const double f = terms_[i].coeff.value(a(static_cast<Eigen::Index>(i)));
            if (!std::isfinite(f)) {
                throw NumericalError("non-finite coefficient for term '" + terms_[i].name + "'");
            }
            if (f != 0.0) h += f * terms_[i].op.matrix();
        }
        return HermitianOperator(std::move(h), "H(a)");
    }

    /// H with the control parameter set to zero.
    HermitianOperator assemble_without_control(RVector a) const {
        check_params(a);
        a(static_cast<Eigen::Index>(control_index_)) = 0.0;
        return assemble(a);
    }

    /// dH/da_i = f_i'(a_i) V_i.
    HermitianOperator grad_h(const RVector& a, std::size_t i) const {
        check_params(a);
        if (i >= terms_.size()) {
            throw InvalidArgument("parameter index " + std::to_string(i) + " out of range (n = " +
                                  std::to_string(terms_.size()) + ")");
        }
        return terms_[i].coeff.derivative(a(static_cast<Eigen::Index>(i))) * terms_[i].op;
    }

    /// Theta_a = i [dH/da_i, Theta].
    HermitianOperator theta_a_op(const RVector& a, const HermitianOperator& theta, std::size_t i) const {
        return i_commutator(grad_h(a, i), theta);
    }

private:
    void check_params(const RVector& a) const {
        if (static_cast<std::size_t>(a.size()) != terms_.size()) {
            throw DimensionMismatch("parameter vector", terms_.size(), static_cast<std::size_t>(a.size()));
        }
    }

    HermitianOperator base_;
    std::vector<HamiltonianTerm> terms_;
    std::size_t control_index_ = 0;
};

/// How a parameter column is read between grid points.
enum class PathInterpolation {
    linear,  ///< straight line between samples
    hold,    ///< value of the left sample over [t_k, t_{k+1})
};

/// Sampled parameter trajectory a(t): row k of values() is a(t_k).
class ParameterPath {
public:
    ParameterPath(std::vector<double> times, RMatrix values,
                  std::optional<RMatrix> velocities = std::nullopt)
        : times_(std::move(times)), values_(std::move(values)), velocities_(std::move(velocities)) {
        if (times_.empty()) throw InvalidArgument("parameter path has no samples");
        if (static_cast<std::size_t>(values_.rows()) != times_.size()) {
            throw DimensionMismatch("parameter path rows", times_.size(), static_cast<std::size_t>(values_.rows()));
        }
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (!(times_[k] > times_[k - 1])) throw InvalidArgument("path times are not strictly increasing");
        }
        if (!values_.allFinite()) throw InvalidArgument("path values are not finite");
        if (velocities_ && (velocities_->rows() != values_.rows() || velocities_->cols() != values_.cols())) {
            throw InvalidArgument("velocity matrix shape does not match values");
        }
        interpolation_.assign(static_cast<std::size_t>(values_.cols()), PathInterpolation::linear);
    }

    /// Path with every parameter constant on a uniform grid of `steps` intervals.
    static ParameterPath constant(const RVector& a, double duration, std::size_t steps) {
        auto t = uniform_times(duration, steps);
        RMatrix v = a.transpose().replicate(static_cast<Eigen::Index>(t.size()), 1);
        return ParameterPath(std::move(t), std::move(v));
    }

    static std::vector<double> uniform_times(double duration, std::size_t steps) {
        if (steps == 0) return {0.0};
        if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
        std::vector<double> t(steps + 1);
        for (std::size_t k = 0; k <= steps; ++k) {
            t[k] = duration * static_cast<double>(k) / static_cast<double>(steps);
        }
        return t;
    }

    const std::vector<double>& times() const noexcept { return times_; }
    const RMatrix& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return times_.size(); }
    std::size_t n_params() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t steps() const noexcept { return times_.size() - 1; }

    RVector at(std::size_t k) const { return values_.row(static_cast<Eigen::Index>(k)).transpose(); }

    void set_interpolation(std::size_t column, PathInterpolation mode) { interpolation_.at(column) = mode; }
    PathInterpolation interpolation(std::size_t column) const { return interpolation_.at(column); }

    /// Overwrite one parameter column.
    void set_column(std::size_t column, const RVector& v) {
        if (static_cast<std::size_t>(v.size()) != size()) {
            throw DimensionMismatch("path column", size(), static_cast<std::size_t>(v.size()));
        }
        if (!v.allFinite()) throw InvalidArgument("path column is not finite");
        values_.col(static_cast<Eigen::Index>(column)) = v;
    }

    /// a((t_k + t_{k+1}) / 2) under each column's interpolation mode.
    RVector midpoint(std::size_t k) const {
        const auto r = static_cast<Eigen::Index>(k);
        RVector out(values_.cols());
        for (Eigen::Index j = 0; j < values_.cols(); ++j) {
            out(j) = interpolation_[static_cast<std::size_t>(j)] == PathInterpolation::hold
                         ? values_(r, j)
                         : 0.5 * (values_(r, j) + values_(r + 1, j));
        }
        return out;
    }

    /// u_a(t_k): supplied velocities, else central differences (one-sided at the ends).
    RVector velocity(std::size_t k) const {
        if (velocities_) return velocities_->row(static_cast<Eigen::Index>(k)).transpose();
        const std::size_t n = size();
        if (n < 2) return RVector::Zero(values_.cols());
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = k + 1 >= n ? n - 1 : k + 1;
        return (at(hi) - at(lo)) / (times_[hi] - times_[lo]);
    }

    /// Grid spacing; throws unless the grid is uniform to 1e-9 relative.
    double uniform_dt() const {
        if (size() < 2) return 0.0;
        const double dt = (times_.back() - times_.front()) / static_cast<double>(steps());
        for (std::size_t k = 1; k < size(); ++k) {
            if (std::abs((times_[k] - times_[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
                throw InvalidArgument("time grid is not uniform at step " + std::to_string(k - 1));
            }
        }
        return dt;
    }

private:
    std::vector<double> times_;
    RMatrix values_;
    std::optional<RMatrix> velocities_;
    std::vector<PathInterpolation> interpolation_;
};

}  // namespace qls
