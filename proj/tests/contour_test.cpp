#include <qls/levelset/contour.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace qls;
using namespace qls::levelset;

namespace {

ParameterMesh sample(const std::vector<double>& x, const std::vector<double>& y,
                     const std::function<double(double, double)>& f) {
    ParameterMesh m;
    m.axis1 = x;
    m.axis2 = y;
    m.values.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f(x[i], y[j]);
    }
    return m;
}

double circle_error(double h) {
    const std::size_t n = static_cast<std::size_t>(std::lround(4.0 / h)) + 1;
    const auto m = sample(linspace(-2, 2, n), linspace(-2, 2, n), [](double a, double b) { return a * a + b * b; });
    const auto curve = extract_level(m, 1.0);
    double e = 0.0;
    for (const auto& line : curve.polylines) {
        for (const auto& p : line) e = std::max(e, std::abs(std::hypot(p.a1, p.a2) - 1.0));
    }
    return e;
}

}  // namespace

TEST(Contour, VerticalLine) {
    const auto m = sample(linspace(0, 1, 11), linspace(0, 1, 7), [](double a, double) { return a; });
    const auto curve = extract_level(m, 0.55);
    ASSERT_EQ(curve.polylines.size(), 1u);
    const auto& line = curve.polylines.front();
    EXPECT_EQ(line.size(), 7u);
    EXPECT_FALSE(LevelCurve::is_closed(line));
    for (const auto& p : line) EXPECT_NEAR(p.a1, 0.55, 1e-14);
}

TEST(Contour, UnitCircleIsClosedAndSecondOrder) {
    const auto m = sample(linspace(-2, 2, 81), linspace(-2, 2, 81), [](double a, double b) { return a * a + b * b; });
    const auto curve = extract_level(m, 1.0);
    ASSERT_EQ(curve.polylines.size(), 1u);
    EXPECT_TRUE(LevelCurve::is_closed(curve.polylines.front()));
    const double h = 0.05;
    EXPECT_LT(circle_error(h), h * h);
    const double ratio = circle_error(0.1) / circle_error(0.05);
    EXPECT_GT(ratio, 3.0);
    EXPECT_LT(ratio, 5.0);
}

TEST(Contour, LevelOutsideRangeIsEmpty) {
    const auto m = sample(linspace(0, 1, 5), linspace(0, 1, 5), [](double a, double b) { return a + b; });
    EXPECT_TRUE(extract_level(m, 2.5).polylines.empty());
    EXPECT_TRUE(extract_level(m, -0.1).polylines.empty());
    const auto thin = sample({0.0}, linspace(0, 1, 5), [](double a, double b) { return a + b; });
    EXPECT_TRUE(extract_level(thin, 0.5).polylines.empty());
}

TEST(Contour, NegatedFieldGivesSameVertexSet) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double p = u(rng), q = u(rng);
        const auto f = [&](double a, double b) { return std::sin(2 * a + p) * std::cos(3 * b - q) + 0.3 * a; };
        const auto m = sample(linspace(-1, 1, 17), linspace(-1, 1, 13), f);
        const auto neg = sample(m.axis1, m.axis2, [&](double a, double b) { return -f(a, b); });
        const double c = 0.1 * u(rng) + 0.0123;
        auto pts = [](const LevelCurve& lc) {
            std::vector<Point> v;
            for (const auto& l : lc.polylines) v.insert(v.end(), l.begin(), l.end());
            std::sort(v.begin(), v.end(), [](const Point& x, const Point& y) {
                return x.a1 < y.a1 || (x.a1 == y.a1 && x.a2 < y.a2);
            });
            v.erase(std::unique(v.begin(), v.end()), v.end());
            return v;
        };
        const auto a = pts(extract_level(m, c));
        const auto b = pts(extract_level(neg, -c));
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_NEAR(a[k].a1, b[k].a1, 1e-12);
            EXPECT_NEAR(a[k].a2, b[k].a2, 1e-12);
        }
    }
}

TEST(Contour, VerticesLieOnTheLevelOfTheBilinearInterpolant) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = sample(linspace(0, 1, 9), linspace(0, 2, 11), [&](double, double) { return u(rng); });
        const double c = 0.2 * u(rng);
        for (const auto& line : extract_level(m, c).polylines) {
            for (const auto& p : line) EXPECT_NEAR(interpolate(m, p), c, 1e-12);
        }
    }
}

TEST(Contour, SaddleUsesCellCentre) {
    // Corners (0,0)=1 (1,0)=0 (1,1)=1 (0,1)=0, centre 0.5.
    ParameterMesh m;
    m.axis1 = {0.0, 1.0};
    m.axis2 = {0.0, 1.0};
    m.values.resize(2, 2);
    m.values << 1.0, 0.0, 0.0, 1.0;
    const auto above = extract_level(m, 0.4);  // centre above: the two low corners are cut off
    ASSERT_EQ(above.polylines.size(), 2u);
    for (const auto& l : above.polylines) {
        const double mid1 = 0.5 * (l.front().a1 + l.back().a1);
        const double mid2 = 0.5 * (l.front().a2 + l.back().a2);
        EXPECT_LT(interpolate(m, {mid1, mid2}), 0.4 + 1e-12);
    }
    const auto below = extract_level(m, 0.6);
    ASSERT_EQ(below.polylines.size(), 2u);
    for (const auto& l : below.polylines) {
        const double mid1 = 0.5 * (l.front().a1 + l.back().a1);
        const double mid2 = 0.5 * (l.front().a2 + l.back().a2);
        EXPECT_GT(interpolate(m, {mid1, mid2}), 0.6 - 1e-12);
    }
}

TEST(Intersect, CircleAndLine) {
    const auto circle = extract_level(
        sample(linspace(-2, 2, 161), linspace(-2, 2, 161), [](double a, double b) { return a * a + b * b; }), 1.0);
    const auto line = extract_level(sample(linspace(-2, 2, 11), linspace(-2, 2, 11), [](double a, double) { return a; }), 0.5);
    const auto pts = intersect(circle, line);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_NEAR(pts[0].a1, 0.5, 1e-12);
    EXPECT_NEAR(pts[0].a2, -std::sqrt(0.75), 1e-3);
    EXPECT_NEAR(pts[1].a2, std::sqrt(0.75), 1e-3);
    EXPECT_EQ(intersect(line, circle).size(), 2u);
}

TEST(Intersect, DisjointAndOverlap) {
    LevelCurve a, b, c;
    a.polylines = {{{0, 0}, {1, 0}}};
    b.polylines = {{{0, 1}, {1, 1}}};
    EXPECT_TRUE(intersect(a, b).empty());
    c.polylines = {{{0.5, 0}, {2, 0}}};
    const auto ov = intersect(a, c);
    ASSERT_EQ(ov.size(), 2u);
    EXPECT_EQ(ov[0], (Point{0.5, 0}));
    EXPECT_EQ(ov[1], (Point{1, 0}));
    LevelCurve empty;
    EXPECT_TRUE(intersect(a, empty).empty());
}

TEST(Intersect, SharedVertexCountedOnce) {
    LevelCurve a, b;
    a.polylines = {{{0, 0}, {1, 1}, {2, 0}}};
    b.polylines = {{{0, 1}, {1, 1}, {2, 2}}};
    const auto pts = intersect(a, b);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0], (Point{1, 1}));
}
