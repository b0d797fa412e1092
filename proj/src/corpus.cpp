#include "scmatch/io.hpp"

#include <cmath>
#include <numbers>

namespace scmatch {

namespace {

NurbsCurve line(const Point2& a, const Point2& b) { return {KnotVector::clamped(1, 0.0, 1.0), {a, b}}; }

/// Degree-1 polyline with chord-length breakpoints on [0, 1].
NurbsCurve polyline(const std::vector<Point2>& pts) {
    std::vector<double> len{0.0};
    for (std::size_t k = 1; k < pts.size(); ++k) len.push_back(len.back() + (pts[k] - pts[k - 1]).norm());
    std::vector<double> interior;
    for (std::size_t k = 1; k + 1 < pts.size(); ++k) interior.push_back(len[k] / len.back());
    return {KnotVector::clamped(1, 0.0, 1.0, interior), pts};
}

/// Cubic B-spline with uniform knots on [0, 1] over the given control points.
NurbsCurve uniform_cubic(const std::vector<Point2>& ctrl) {
    const int n = static_cast<int>(ctrl.size());
    std::vector<double> interior;
    for (int k = 1; k < n - 3; ++k) interior.push_back(static_cast<double>(k) / (n - 3));
    return {KnotVector::clamped(3, 0.0, 1.0, interior), ctrl};
}

// S-channel: centerline (A sin(2 pi s / L), s), unit width.
constexpr double kSLength = 10.0;
constexpr double kSAmplitude = 1.5;
constexpr double kSWidth = 1.0;
constexpr int kSControl = 24;
constexpr double kSEastGamma = 2.2;

Point2 s_offset(double s, double side) {
    const double k = 2.0 * std::numbers::pi / kSLength;
    const Point2 c(kSAmplitude * std::sin(k * s), s);
    const Vector2 tangent(kSAmplitude * k * std::cos(k * s), 1.0);
    const Vector2 normal = Vector2(tangent.y(), -tangent.x()).normalized();
    return c + side * 0.5 * kSWidth * normal;
}

}  // namespace

Brep corpus_square() {
    Brep b;
    b.south = line({0, 0}, {1, 0});
    b.east = line({1, 0}, {1, 1});
    b.north = line({0, 1}, {1, 1});
    b.west = line({0, 0}, {0, 1});
    return b;
}

Brep corpus_rectangle(double length, bool distorted_east) {
    Brep b;
    b.south = line({0, 0}, {1, 0});
    b.north = line({0, length}, {1, length});
    b.west = line({0, 0}, {0, length});
    if (distorted_east) {
        // Straight East side whose speed varies strongly along the curve.
        std::vector<Point2> ctrl;
        const int n = 8;
        for (int k = 0; k < n; ++k) {
            const double r = static_cast<double>(k) / (n - 1);
            ctrl.emplace_back(1.0, length * (0.3 * r + 0.7 * r * r));
        }
        b.east = uniform_cubic(ctrl);
    } else {
        b.east = line({1, 0}, {1, length});
    }
    return b;
}

Brep corpus_annulus() {
    const double w = std::sqrt(0.5);
    Brep b;
    b.south = line({1, 0}, {2, 0});
    b.north = line({0, 1}, {0, 2});
    b.east = NurbsCurve(KnotVector::clamped(2, 0.0, 1.0), {{2, 0}, {2, 2}, {0, 2}}, {1.0, w, 1.0});
    b.west = NurbsCurve(KnotVector::clamped(2, 0.0, 1.0), {{1, 0}, {1, 1}, {0, 1}}, {1.0, w, 1.0});
    return b;
}

Brep corpus_s_channel() {
    std::vector<Point2> west, east;
    for (int k = 0; k < kSControl; ++k) {
        const double r = static_cast<double>(k) / (kSControl - 1);
        west.push_back(s_offset(kSLength * r, -1.0));
        // Unevenly spaced samples: East's parameter speed differs from West's.
        east.push_back(s_offset(kSLength * std::pow(r, kSEastGamma), 1.0));
    }
    Brep b;
    b.west = uniform_cubic(west);
    b.east = uniform_cubic(east);
    b.south = line(west.front(), east.front());
    b.north = line(west.back(), east.back());
    return b;
}

Brep corpus_l_channel() {
    Brep b;
    b.west = polyline({{0, 0}, {0, 7}, {6, 7}});
    b.east = polyline({{1, 0}, {1, 6}, {6, 6}});
    b.south = line({0, 0}, {1, 0});
    b.north = line({6, 7}, {6, 6});
    return b;
}

std::map<std::string, Brep> corpus() {
    return {
        {"square", corpus_square()},
        {"rect5", corpus_rectangle(5.0, true)},
        {"rect20", corpus_rectangle(20.0, true)},
        {"annulus", corpus_annulus()},
        {"s_channel", corpus_s_channel()},
        {"l_channel", corpus_l_channel()},
    };
}

}  // namespace scmatch
