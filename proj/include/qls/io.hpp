#pragma once

// CSV artifacts. Every floating-point value is printed with 17 significant
// digits so files round-trip bit-exactly.

#include <qls/errors.hpp>
#include <qls/levelset/contour.hpp>
#include <qls/levelset/mesh.hpp>
#include <qls/oct.hpp>
#include <qls/propagator.hpp>
#include <qls/tracking.hpp>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qls::io {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool state_columns = false) {
    os << "t,theta,norm";
    const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
    if (state_columns) {
        for (Eigen::Index k = 0; k < n; ++k) os << ",re_" << k << ",im_" << k;
    }
    os << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        os << fmt(traj.times[i]) << ',' << fmt(traj.theta_values[i]) << ',' << fmt(traj.norms[i]);
        if (state_columns) {
            for (Eigen::Index k = 0; k < n; ++k) {
                os << ',' << fmt(traj.states[i](k).real()) << ',' << fmt(traj.states[i](k).imag());
            }
        }
        os << '\n';
    }
}

inline void write_tracking_csv(std::ostream& os, const TrackingResult& r) {
    const Eigen::Index n = r.rates.empty() ? 0 : r.rates.front().theta_a.size();
    os << "t,control,theta,residual,theta_o";
    for (Eigen::Index k = 0; k < n; ++k) os << ",theta_a_" << (k + 1);
    os << '\n';
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
        os << fmt(r.trajectory.times[i]) << ',' << fmt(r.control_values[i]) << ','
           << fmt(r.trajectory.theta_values[i]) << ',' << fmt(r.residuals[i]) << ',' << fmt(r.rates[i].theta_o);
        for (Eigen::Index k = 0; k < n; ++k) os << ',' << fmt(r.rates[i].theta_a(k));
        os << '\n';
    }
}

inline void write_band_report_csv(std::ostream& os, const ToleranceBandReport& rep) {
    os << "theta_mean,theta_amplitude,fitted_omega,ratio,within_band\n"
       << fmt(rep.theta_mean) << ',' << fmt(rep.theta_amplitude) << ',' << fmt(rep.fitted_omega) << ','
       << fmt(rep.ratio) << ',' << (rep.within_band ? "true" : "false") << '\n';
}

inline void write_history_csv(std::ostream& os, const std::vector<CostBreakdown>& history) {
    os << "iter,terminal,running,fluence,total\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& c = history[i];
        os << i << ',' << fmt(c.terminal) << ',' << fmt(c.running) << ',' << fmt(c.fluence) << ',' << fmt(c.total)
           << '\n';
    }
}

inline void write_field_csv(std::ostream& os, const std::vector<double>& times, const std::vector<double>& field) {
    if (times.size() != field.size()) throw DimensionMismatch("field samples", times.size(), field.size());
    os << "t,E\n";
    for (std::size_t i = 0; i < times.size(); ++i) os << fmt(times[i]) << ',' << fmt(field[i]) << '\n';
}

/// Header row: a corner cell then the axis2 values; each following row
/// starts with its axis1 value.
inline void write_mesh_csv(std::ostream& os, const levelset::ParameterMesh& mesh) {
    os << "a1\\a2";
    for (double y : mesh.axis2) os << ',' << fmt(y);
    os << '\n';
    for (std::size_t i = 0; i < mesh.axis1.size(); ++i) {
        os << fmt(mesh.axis1[i]);
        for (std::size_t j = 0; j < mesh.axis2.size(); ++j) {
            os << ',' << fmt(mesh.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        os << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("cannot parse number '" + s + "' in " + where);
    }
}

inline bool next_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return true;
    }
    return false;
}

}  // namespace detail

inline levelset::ParameterMesh read_mesh_csv(std::istream& is, double control_label = 0.0) {
    std::string line;
    if (!detail::next_line(is, line)) throw InvalidArgument("mesh CSV is empty");
    auto header = detail::split(line);
    if (header.size() < 2) throw InvalidArgument("mesh CSV header has no axis2 values");
    levelset::ParameterMesh mesh;
    mesh.control_label = control_label;
    for (std::size_t j = 1; j < header.size(); ++j) mesh.axis2.push_back(detail::parse_double(header[j], "mesh header"));
    std::vector<std::vector<double>> rows;
    while (detail::next_line(is, line)) {
        auto cells = detail::split(line);
        if (cells.size() != header.size()) throw InvalidArgument("mesh CSV row has wrong column count");
        mesh.axis1.push_back(detail::parse_double(cells[0], "mesh row"));
        std::vector<double> row;
        for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(detail::parse_double(cells[j], "mesh row"));
        rows.push_back(std::move(row));
    }
    mesh.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mesh.axis2.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            mesh.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    mesh.validate();
    return mesh;
}

inline void write_curve_csv(std::ostream& os, const levelset::LevelCurve& curve) {
    os << "curve_id,vertex_id,a1,a2\n";
    for (std::size_t c = 0; c < curve.polylines.size(); ++c) {
        for (std::size_t v = 0; v < curve.polylines[c].size(); ++v) {
            os << c << ',' << v << ',' << fmt(curve.polylines[c][v].a1) << ',' << fmt(curve.polylines[c][v].a2)
               << '\n';
        }
    }
}

inline levelset::LevelCurve read_curve_csv(std::istream& is, double level = 0.0) {
    std::string line;
    if (!detail::next_line(is, line) || line != "curve_id,vertex_id,a1,a2") {
        throw InvalidArgument("curve CSV has an unexpected header");
    }
    levelset::LevelCurve curve;
    curve.level = level;
    long current = -1;
    while (detail::next_line(is, line)) {
        auto cells = detail::split(line);
        if (cells.size() != 4) throw InvalidArgument("curve CSV row has wrong column count");
        const long id = static_cast<long>(detail::parse_double(cells[0], "curve_id"));
        if (id != current) {
            if (id != current + 1) throw InvalidArgument("curve ids must be consecutive");
            curve.polylines.emplace_back();
            current = id;
        }
        curve.polylines.back().push_back(
            {detail::parse_double(cells[2], "curve a1"), detail::parse_double(cells[3], "curve a2")});
    }
    return curve;
}

inline void write_points_csv(std::ostream& os, const std::vector<levelset::Point>& pts) {
    os << "a1,a2\n";
    for (const auto& p : pts) os << fmt(p.a1) << ',' << fmt(p.a2) << '\n';
}

}  // namespace qls::io
