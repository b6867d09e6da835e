#include "test_util.hpp"

#include <qls/levelset/mesh.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace qls;
using namespace qls::levelset;

namespace {

ParameterMesh sample(const std::vector<double>& x, const std::vector<double>& y,
                     const std::function<double(double, double)>& f, double label = 0.0) {
    ParameterMesh m;
    m.axis1 = x;
    m.axis2 = y;
    m.control_label = label;
    m.values.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f(x[i], y[j]);
    }
    return m;
}

/// H = a1 sz + a2 sx + a3 sy, all constant in time.
ParameterizedHamiltonian precession_model() {
    return ParameterizedHamiltonian(HermitianOperator::zero(2),
                                    {{"a1", ops::pauli_z(), Coefficient::linear(), TermRole::system},
                                     {"a2", ops::pauli_x(), Coefficient::linear(), TermRole::system},
                                     {"a3", ops::pauli_y(), Coefficient::linear(), TermRole::control}});
}

ProtocolTemplate constant_template(double duration, std::size_t steps) {
    return {duration, steps, [](double a1, double a2, double a3, double) {
                RVector v(3);
                v << a1, a2, a3;
                return v;
            }};
}

}  // namespace

TEST(EvaluateMesh, IdentityObservableIsOne) {
    const auto m = evaluate_mesh(precession_model(), constant_template(1.0, 20), State::basis(2, 0),
                                 HermitianOperator::identity(2), linspace(-1, 1, 4), linspace(-1, 1, 5), 0.3);
    EXPECT_EQ(m.values.rows(), 4);
    EXPECT_EQ(m.values.cols(), 5);
    EXPECT_LT((m.values.array() - 1.0).abs().maxCoeff(), 1e-14);
    EXPECT_EQ(m.control_label, 0.3);
}

TEST(EvaluateMesh, MatchesClosedFormPrecession) {
    // <sz>(T) = (a1^2 + a2^2 cos(2 W T)) / W^2, W = sqrt(a1^2 + a2^2)
    const double T = 1.3;
    const auto ax1 = linspace(0.2, 1.5, 7);
    const auto ax2 = linspace(-1.0, 1.2, 6);
    const auto m = evaluate_mesh(precession_model(), constant_template(T, 50), State::basis(2, 0), ops::pauli_z(), ax1,
                                 ax2, 0.0);
    for (std::size_t i = 0; i < ax1.size(); ++i) {
        for (std::size_t j = 0; j < ax2.size(); ++j) {
            const double a1 = ax1[i], a2 = ax2[j];
            const double w2 = a1 * a1 + a2 * a2;
            const double expected = (a1 * a1 + a2 * a2 * std::cos(2 * std::sqrt(w2) * T)) / w2;
            EXPECT_NEAR(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected, 1e-8);
        }
    }
}

TEST(EvaluateMesh, SingleNode) {
    const auto m = evaluate_mesh(precession_model(), constant_template(1.0, 10), State::basis(2, 0), ops::pauli_z(),
                                 {0.5}, {0.5}, 0.0);
    ASSERT_EQ(m.values.size(), 1);
    EXPECT_NEAR(interpolate(m, {0.5, 0.5}), m.values(0, 0), 0.0);
}

TEST(EvaluateMesh, ThreadCountDoesNotChangeValues) {
    const auto run = [](unsigned threads) {
        MeshOptions o;
        o.threads = threads;
        o.statistic = MeshStatistic::window_average;
        o.window = 0.5;
        return evaluate_mesh(precession_model(), constant_template(2.0, 40), State::basis(2, 0), ops::pauli_z(),
                             linspace(-1, 1, 9), linspace(-1, 1, 8), 0.2, o);
    };
    const auto a = run(1);
    const auto b = run(4);
    EXPECT_TRUE((a.values.array() == b.values.array()).all());
}

TEST(EvaluateMesh, FailedNodePoisonsMesh) {
    ProtocolTemplate t = constant_template(1.0, 10);
    t.parameters = [](double a1, double a2, double a3, double) {
        RVector v(3);
        v << (a1 > 0.9 ? std::nan("") : a1), a2, a3;
        return v;
    };
    try {
        evaluate_mesh(precession_model(), t, State::basis(2, 0), ops::pauli_z(), linspace(0, 1, 3), linspace(0, 1, 2), 0.0);
        FAIL() << "expected failure";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("node (2, 0)"), std::string::npos) << e.what();
    }
}

TEST(WindowStatistic, AveragesFinalWindow) {
    Trajectory tr;
    for (int k = 0; k <= 10; ++k) {
        tr.times.push_back(0.1 * k);
        tr.theta_values.push_back(0.1 * k);
    }
    EXPECT_NEAR(trajectory_statistic(tr, MeshStatistic::window_average, 0.4), 0.8, 1e-12);
    EXPECT_EQ(trajectory_statistic(tr, MeshStatistic::terminal, 0.4), 1.0);
}

TEST(Spline, NotAKnotReproducesCubics) {
    const std::vector<double> x = {-1.0, -0.7, -0.1, 0.3, 0.35, 0.9, 1.4};
    const auto f = [](double t) { return 2 * t * t * t - t * t + 0.5 * t - 3; };
    RVector y(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = f(x[i]);
    const NotAKnotSpline s(x);
    for (double t = -1.0; t <= 1.4; t += 0.013) EXPECT_NEAR(s(y, t), f(t), 1e-12);
    // Three points: the interpolating parabola.
    const std::vector<double> x3 = {0.0, 0.4, 1.0};
    const auto g = [](double t) { return 1 + t - 2 * t * t; };
    const NotAKnotSpline s3(x3);
    RVector y3(3);
    y3 << g(0.0), g(0.4), g(1.0);
    EXPECT_NEAR(s3(y3, 0.77), g(0.77), 1e-14);
}

TEST(Interpolate, NodesAreExact) {
    const auto m = sample(linspace(0, 1, 6), linspace(-1, 2, 7), [](double a, double b) { return std::sin(3 * a) * std::exp(b); });
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 7; ++j) {
            const Point p{m.axis1[i], m.axis2[j]};
            const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            EXPECT_EQ(interpolate(m, p, InterpolationKind::bilinear), v);
            EXPECT_NEAR(interpolate(m, p, InterpolationKind::bicubic), v, 1e-13);
        }
    }
}

TEST(Interpolate, BilinearReproducesLinearFields) {
    const auto f = [](double a, double b) { return 0.3 + 2 * a - 1.5 * b; };
    const auto m = sample(linspace(-1, 1, 5), linspace(0, 3, 4), f);
    for (double a = -1; a <= 1; a += 0.07) {
        for (double b = 0; b <= 3; b += 0.11) EXPECT_NEAR(interpolate(m, {a, b}), f(a, b), 1e-13);
    }
}

TEST(Interpolate, RefinementOrders) {
    const auto f = [](double a, double b) { return std::sin(a) * std::cos(1.3 * b); };
    const auto center_error = [&](std::size_t n, InterpolationKind kind) {
        const auto m = sample(linspace(0, 2, n), linspace(0, 2, n), f);
        const MeshInterpolator in(m, kind);
        double e = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = 0; j + 1 < n; ++j) {
                const double a = 0.5 * (m.axis1[i] + m.axis1[i + 1]);
                const double b = 0.5 * (m.axis2[j] + m.axis2[j + 1]);
                e = std::max(e, std::abs(in({a, b}) - f(a, b)));
            }
        }
        return e;
    };
    const double lin = center_error(21, InterpolationKind::bilinear) / center_error(41, InterpolationKind::bilinear);
    const double cub = center_error(21, InterpolationKind::bicubic) / center_error(41, InterpolationKind::bicubic);
    EXPECT_GT(lin, 3.5);
    EXPECT_LT(lin, 4.5);
    EXPECT_GT(cub, 12.0);
    EXPECT_LT(center_error(21, InterpolationKind::bicubic), center_error(21, InterpolationKind::bilinear));

    // Phi = a1^2: the spline is exact, bilinear is not.
    const auto sq = sample(linspace(-1, 1, 41), linspace(-1, 1, 41), [](double a, double) { return a * a; });
    const Point centre{0.025, 0.025};
    const double bil = std::abs(interpolate(sq, centre, InterpolationKind::bilinear) - centre.a1 * centre.a1);
    const double bic = std::abs(interpolate(sq, centre, InterpolationKind::bicubic) - centre.a1 * centre.a1);
    EXPECT_LT(bic, bil);
}

TEST(Interpolate, RejectsOutOfHull) {
    const auto m = sample(linspace(0, 1, 3), linspace(0, 1, 3), [](double a, double b) { return a + b; });
    EXPECT_THROW(interpolate(m, {1.1, 0.5}), InvalidArgument);
    EXPECT_THROW(interpolate(m, {0.5, -0.01}, InterpolationKind::bicubic), InvalidArgument);
}

TEST(MeshGradient, LinearConstantAndQuadratic) {
    const auto lin = sample(linspace(-1, 1, 11), linspace(-1, 1, 11), [](double a, double b) { return 2 * a - 3 * b; });
    for (auto kind : {InterpolationKind::bilinear, InterpolationKind::bicubic}) {
        const auto g = mesh_gradient(lin, {0.13, -0.4}, kind);
        EXPECT_NEAR(g[0], 2.0, 1e-10);
        EXPECT_NEAR(g[1], -3.0, 1e-10);
        // corner: one-sided differences
        const auto c = mesh_gradient(lin, {1.0, -1.0}, kind);
        EXPECT_NEAR(c[0], 2.0, 1e-10);
        EXPECT_NEAR(c[1], -3.0, 1e-10);
    }
    const auto flat = sample(linspace(0, 1, 4), linspace(0, 1, 4), [](double, double) { return 0.7; });
    const auto z = mesh_gradient(flat, {0.3, 0.6});
    EXPECT_NEAR(z[0], 0.0, 1e-12);
    EXPECT_NEAR(z[1], 0.0, 1e-12);

    const double h = 0.05;
    const auto bowl = sample(linspace(-2, 2, 81), linspace(-2, 2, 81), [](double a, double b) { return a * a + b * b; });
    const auto g = mesh_gradient(bowl, {1.0, 0.0}, InterpolationKind::bilinear);
    EXPECT_NEAR(g[0], 2.0, h * h);
    EXPECT_NEAR(g[1], 0.0, h * h);
    EXPECT_THROW(mesh_gradient(bowl, {2.5, 0.0}), InvalidArgument);
}
