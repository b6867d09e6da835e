#include <qls/levelset/follow.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace qls;
using namespace qls::levelset;

namespace {

ParameterMesh sample(const std::vector<double>& x, const std::vector<double>& y, double label,
                     const std::function<double(double, double)>& f) {
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

/// Phi(a1, a2; a3) = a1 + a3 on a family of labels.
std::vector<ParameterMesh> additive_family(const std::vector<double>& labels) {
    std::vector<ParameterMesh> fam;
    for (double l : labels) fam.push_back(sample(linspace(0, 1, 6), linspace(0, 1, 4), l, [l](double a, double) { return a + l; }));
    return fam;
}

}  // namespace

TEST(FollowLevel, RecoversLinearSchedule) {
    // Phi = a1 + a3 = 1 with a1 = t gives a3 = 1 - t.
    const auto fam = additive_family({-0.5, 0.0, 0.25, 0.5, 1.0, 1.5});
    std::vector<Point> path;
    for (int k = 0; k <= 20; ++k) path.push_back({0.05 * k, 0.3});
    const auto a3 = follow_level(fam, path, 1.0);
    ASSERT_EQ(a3.size(), path.size());
    for (std::size_t k = 0; k < path.size(); ++k) EXPECT_NEAR(a3[k], 1.0 - path[k].a1, 1e-9);
}

TEST(FollowLevel, TieTakesLowestLabel) {
    // Phi does not depend on a3 near the first two labels, so every label ties.
    std::vector<ParameterMesh> fam;
    for (double l : {0.0, 1.0, 2.0}) fam.push_back(sample({0.0, 1.0}, {0.0, 1.0}, l, [](double, double) { return 0.5; }));
    const auto a3 = follow_level(fam, {{0.5, 0.5}}, 0.5);
    EXPECT_EQ(a3.front(), 0.0);
}

TEST(FollowLevel, NoBracketReportsSample) {
    const auto fam = additive_family({0.0, 0.5});
    try {
        follow_level(fam, {{0.1, 0.0}, {0.9, 0.0}}, 1.2);
        FAIL() << "expected NoBracket";
    } catch (const NoBracket& e) {
        EXPECT_EQ(e.sample(), 0u);
        EXPECT_NEAR(e.range_min(), 0.1, 1e-12);
        EXPECT_NEAR(e.range_max(), 0.6, 1e-12);
    }
}

TEST(FollowLevel, RejectsBadFamilies) {
    auto fam = additive_family({0.0, 0.5});
    std::swap(fam[0], fam[1]);
    EXPECT_THROW(follow_level(fam, {{0.1, 0.1}}, 0.3), InvalidArgument);
    auto mixed = additive_family({0.0, 0.5});
    mixed[1].axis1.back() = 2.0;
    EXPECT_THROW(follow_level(mixed, {{0.1, 0.1}}, 0.3), InvalidArgument);
}

TEST(Stationarity, SyntheticZeroAtA3Zero) {
    // Phi = a3 a1, target 0, w_running = 1, h = 1/2 a3^2.
    // r = 2 Phi dPhi/da3 + a3 = a3 (2 a1^2 + 1): zero only at a3 = 0.
    const std::vector<double> labels = {-0.9, -0.5, -0.1, 0.3, 0.7};
    const auto ax1 = linspace(-1, 1, 5);
    const auto ax2 = linspace(0, 1, 3);
    std::vector<ParameterMesh> theta, cost;
    SurfaceCost h;
    for (double l : labels) {
        theta.push_back(sample(ax1, ax2, l, [l](double a, double) { return l * a; }));
        cost.push_back(cost_surface(ax1, ax2, l, h));
    }
    CostConfig cc;
    cc.theta_target = 0.0;
    cc.w_running = 1.0;
    cc.w_terminal = 0.0;
    cc.w_fluence = 0.0;
    cc.horizon = 1.0;
    const auto residuals = stationarity_family(theta, cost, cc);
    ASSERT_EQ(residuals.size(), 3u);
    // Follow the zero of r across labels at each node.
    const std::vector<Point> nodes = {{-1, 0}, {0, 0.5}, {0.5, 1}};
    const auto a3 = follow_level(residuals, nodes, 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        EXPECT_NEAR(a3[k], 0.0, 1e-12);
        const double a1 = nodes[k].a1;
        EXPECT_NEAR(interpolate(residuals[1], nodes[k]), -0.1 * (2 * a1 * a1 + 1), 1e-12);
    }
}

TEST(Stationarity, NeedsInteriorLabel) {
    const auto ax = linspace(0, 1, 3);
    std::vector<ParameterMesh> theta, cost;
    for (double l : {0.0, 1.0, 2.0}) {
        theta.push_back(sample(ax, ax, l, [](double, double) { return 0.0; }));
        cost.push_back(cost_surface(ax, ax, l, {}));
    }
    CostConfig cc;
    EXPECT_THROW(stationarity_residual(theta, cost, 0, cc), InvalidArgument);
    EXPECT_THROW(stationarity_residual(theta, cost, 2, cc), InvalidArgument);
    EXPECT_NO_THROW(stationarity_residual(theta, cost, 1, cc));
}
