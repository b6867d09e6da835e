#include <qls/io.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace qls;

TEST(Io, FormatsRoundTripBitExactly) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::stod(io::fmt(v)), v);
    }
}

TEST(Io, MeshRoundTrip) {
    levelset::ParameterMesh m;
    m.axis1 = {0.1, 0.2, 0.35};
    m.axis2 = {-1.0, 1.0 / 3.0};
    m.values.resize(3, 2);
    m.values << 1.0 / 7.0, 2, 3, 4e-300, -5, 6.25;
    std::stringstream ss;
    io::write_mesh_csv(ss, m);
    const auto back = io::read_mesh_csv(ss, 0.5);
    EXPECT_EQ(back.axis1, m.axis1);
    EXPECT_EQ(back.axis2, m.axis2);
    EXPECT_TRUE((back.values.array() == m.values.array()).all());
    EXPECT_EQ(back.control_label, 0.5);
}

TEST(Io, CurveRoundTrip) {
    levelset::LevelCurve c;
    c.polylines = {{{0, 0}, {0.5, 1.0 / 3.0}}, {{1, 1}, {2, 2}, {1, 1}}};
    std::stringstream ss;
    io::write_curve_csv(ss, c);
    const auto back = io::read_curve_csv(ss, 0.25);
    ASSERT_EQ(back.polylines.size(), 2u);
    EXPECT_EQ(back.polylines[0], c.polylines[0]);
    EXPECT_EQ(back.polylines[1], c.polylines[1]);
    EXPECT_TRUE(levelset::LevelCurve::is_closed(back.polylines[1]));
}

TEST(Io, RejectsMalformedInput) {
    std::stringstream bad_header("x,y\n");
    EXPECT_THROW(io::read_curve_csv(bad_header), InvalidArgument);
    std::stringstream ragged("a1\\a2,0,1\n0,1\n");
    EXPECT_THROW(io::read_mesh_csv(ragged), InvalidArgument);
    std::stringstream junk("a1\\a2,0,1\n0,1,abc\n");
    EXPECT_THROW(io::read_mesh_csv(junk), InvalidArgument);
    std::stringstream empty("");
    EXPECT_THROW(io::read_mesh_csv(empty), InvalidArgument);
}

TEST(Io, FieldAndHistoryHeaders) {
    std::stringstream f;
    io::write_field_csv(f, {0.0, 0.5}, {1.0, 2.0});
    EXPECT_EQ(f.str(), "t,E\n0,1\n0.5,2\n");
    EXPECT_THROW(io::write_field_csv(f, {0.0}, {1.0, 2.0}), DimensionMismatch);
    std::stringstream h;
    io::write_history_csv(h, {CostBreakdown{1, 2, 3, 6}});
    EXPECT_EQ(h.str(), "iter,terminal,running,fluence,total\n0,1,2,3,6\n");
}
