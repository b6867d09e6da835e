#pragma once

// Iso-curves of a ParameterMesh by marching squares, and intersections of
// two such curves.

#include <qls/levelset/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace qls::levelset {

using Polyline = std::vector<Point>;

struct LevelCurve {
    double level = 0.0;
    std::vector<Polyline> polylines;  ///< closed loops repeat their first vertex

    static bool is_closed(const Polyline& p) { return p.size() > 2 && p.front() == p.back(); }
    std::size_t vertex_count() const {
        std::size_t n = 0;
        for (const auto& p : polylines) n += p.size();
        return n;
    }
};

namespace detail {

struct EdgeSegment {
    std::uint64_t from;
    std::uint64_t to;
};

}  // namespace detail

/// Marching squares at level c with linear interpolation along cell edges.
///
/// A node is classified as above when Phi >= c, which is the same as nudging
/// nodes equal to c upward by a negligible amount. Saddle cells connect the
/// corners that agree with the cell-center average (mean of the four
/// corners). Segments are chained into maximal polylines: open curves first,
/// starting from boundary ends in edge order, then closed loops.
inline LevelCurve extract_level(const ParameterMesh& mesh, double c) {
    mesh.validate();
    LevelCurve curve;
    curve.level = c;
    const std::size_t n1 = mesh.axis1.size();
    const std::size_t n2 = mesh.axis2.size();
    if (n1 < 2 || n2 < 2) return curve;
    if (c > mesh.values.maxCoeff() || c < mesh.values.minCoeff()) return curve;

    const auto v = [&](std::size_t i, std::size_t j) {
        return mesh.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    // Edge keys: 2 (i n2 + j) for the a1-directed edge from node (i, j),
    // 2 (i n2 + j) + 1 for the a2-directed one.
    const auto h_edge = [&](std::size_t i, std::size_t j) -> std::uint64_t { return 2 * (i * n2 + j); };
    const auto v_edge = [&](std::size_t i, std::size_t j) -> std::uint64_t { return 2 * (i * n2 + j) + 1; };

    std::map<std::uint64_t, Point> vertices;
    const auto vertex = [&](std::uint64_t key) -> std::uint64_t {
        if (vertices.count(key)) return key;
        const std::size_t node = key / 2;
        const std::size_t i = node / n2;
        const std::size_t j = node % n2;
        const bool along_a1 = key % 2 == 0;
        const double f0 = v(i, j);
        const double f1 = along_a1 ? v(i + 1, j) : v(i, j + 1);
        const double t = (c - f0) / (f1 - f0);
        Point p;
        if (along_a1) {
            p = {mesh.axis1[i] + t * (mesh.axis1[i + 1] - mesh.axis1[i]), mesh.axis2[j]};
        } else {
            p = {mesh.axis1[i], mesh.axis2[j] + t * (mesh.axis2[j + 1] - mesh.axis2[j])};
        }
        vertices.emplace(key, p);
        return key;
    };

    std::vector<detail::EdgeSegment> segments;
    for (std::size_t i = 0; i + 1 < n1; ++i) {
        for (std::size_t j = 0; j + 1 < n2; ++j) {
            // corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1)
            const double f[4] = {v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)};
            int code = 0;
            for (int k = 0; k < 4; ++k) code |= (f[k] >= c ? 1 : 0) << k;
            if (code == 0 || code == 15) continue;
            const std::uint64_t e[4] = {h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)};
            const auto add = [&](int a, int b) { segments.push_back({vertex(e[a]), vertex(e[b])}); };
            if (code == 5 || code == 10) {
                const bool center_above = 0.25 * (f[0] + f[1] + f[2] + f[3]) >= c;
                // Cut off the corners whose side does not contain the center.
                const bool cut_odd = (code == 5) == center_above;  // corners 1 and 3
                if (cut_odd) {
                    add(0, 1);
                    add(2, 3);
                } else {
                    add(0, 3);
                    add(1, 2);
                }
                continue;
            }
            // Exactly two crossing edges otherwise.
            int crossing[2];
            int n = 0;
            for (int k = 0; k < 4; ++k) {
                const int a = k;
                const int b = (k + 1) % 4;
                if (((code >> a) & 1) != ((code >> b) & 1)) crossing[n++] = k;
            }
            add(crossing[0], crossing[1]);
        }
    }

    std::map<std::uint64_t, std::vector<std::size_t>> incident;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        incident[segments[s].from].push_back(s);
        incident[segments[s].to].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);

    const auto append = [&](Polyline& line, std::uint64_t key) {
        const Point& p = vertices.at(key);
        if (line.empty() || !(line.back() == p)) line.push_back(p);
    };
    const auto walk = [&](std::uint64_t start, std::size_t first) {
        Polyline line;
        append(line, start);
        std::uint64_t at = start;
        std::size_t seg = first;
        while (true) {
            used[seg] = true;
            at = segments[seg].from == at ? segments[seg].to : segments[seg].from;
            append(line, at);
            std::size_t next = segments.size();
            for (std::size_t s : incident[at]) {
                if (!used[s]) {
                    next = s;
                    break;
                }
            }
            if (next == segments.size()) break;
            seg = next;
        }
        if (line.size() >= 2) curve.polylines.push_back(std::move(line));
    };

    for (const auto& [key, segs] : incident) {
        if (segs.size() == 1 && !used[segs.front()]) walk(key, segs.front());
    }
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (!used[s]) walk(segments[s].from, s);
    }
    return curve;
}

/// All crossings between the segments of two curves, deduplicated within
/// 1e-9 and sorted by (a1, a2). Collinear overlaps contribute the two
/// endpoints of the overlap.
inline std::vector<Point> intersect(const LevelCurve& a, const LevelCurve& b) {
    constexpr double kDedup = 1e-9;
    constexpr double kParallel = 1e-12;
    std::vector<Point> out;
    const auto add = [&](Point p) {
        for (const auto& q : out) {
            if (std::hypot(p.a1 - q.a1, p.a2 - q.a2) <= kDedup) return;
        }
        out.push_back(p);
    };
    const auto cross = [](double x1, double y1, double x2, double y2) { return x1 * y2 - y1 * x2; };

    for (const auto& pa : a.polylines) {
        for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
            const Point p = pa[i];
            const double rx = pa[i + 1].a1 - p.a1;
            const double ry = pa[i + 1].a2 - p.a2;
            const double rlen = std::hypot(rx, ry);
            if (rlen == 0.0) continue;
            for (const auto& pb : b.polylines) {
                for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
                    const Point q = pb[j];
                    const double sx = pb[j + 1].a1 - q.a1;
                    const double sy = pb[j + 1].a2 - q.a2;
                    const double slen = std::hypot(sx, sy);
                    if (slen == 0.0) continue;
                    const double pad = kDedup;
                    if (std::max(p.a1, p.a1 + rx) + pad < std::min(q.a1, q.a1 + sx) ||
                        std::max(q.a1, q.a1 + sx) + pad < std::min(p.a1, p.a1 + rx) ||
                        std::max(p.a2, p.a2 + ry) + pad < std::min(q.a2, q.a2 + sy) ||
                        std::max(q.a2, q.a2 + sy) + pad < std::min(p.a2, p.a2 + ry)) {
                        continue;
                    }
                    const double qpx = q.a1 - p.a1;
                    const double qpy = q.a2 - p.a2;
                    const double denom = cross(rx, ry, sx, sy);
                    if (std::abs(denom) > kParallel * rlen * slen) {
                        const double t = cross(qpx, qpy, sx, sy) / denom;
                        const double u = cross(qpx, qpy, rx, ry) / denom;
                        const double tol = 1e-12;
                        if (t >= -tol && t <= 1.0 + tol && u >= -tol && u <= 1.0 + tol) {
                            const double tc = std::clamp(t, 0.0, 1.0);
                            add({p.a1 + tc * rx, p.a2 + tc * ry});
                        }
                        continue;
                    }
                    // Parallel: only collinear overlaps intersect.
                    if (std::abs(cross(qpx, qpy, rx, ry)) > kParallel * rlen * std::max(rlen, std::hypot(qpx, qpy))) {
                        continue;
                    }
                    const double r2 = rlen * rlen;
                    const double t0 = (qpx * rx + qpy * ry) / r2;
                    const double t1 = ((qpx + sx) * rx + (qpy + sy) * ry) / r2;
                    const double lo = std::max(0.0, std::min(t0, t1));
                    const double hi = std::min(1.0, std::max(t0, t1));
                    if (lo > hi) continue;
                    add({p.a1 + lo * rx, p.a2 + lo * ry});
                    add({p.a1 + hi * rx, p.a2 + hi * ry});
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Point& x, const Point& y) {
        return x.a1 < y.a1 || (x.a1 == y.a1 && x.a2 < y.a2);
    });
    return out;
}

}  // namespace qls::levelset
