#pragma once

#include "scmatch/splines.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testutil {

using scmatch::KnotVector;
using scmatch::NurbsCurve;
using scmatch::NurbsSurface;
using scmatch::Point2;

inline NurbsCurve line(const Point2& a, const Point2& b) {
    return {KnotVector::clamped(1, 0.0, 1.0), {a, b}};
}

/// Exact rational quadratic arc of the unit circle from (1,0) to (0,1).
inline NurbsCurve quarter_circle(double radius = 1.0) {
    return {KnotVector::clamped(2, 0.0, 1.0),
            {{radius, 0.0}, {radius, radius}, {0.0, radius}},
            {1.0, std::sqrt(0.5), 1.0}};
}

/// Clamped knot vector on [a, b] with random interior knots (some repeated).
inline KnotVector random_knots(std::mt19937_64& rng, int p, double a = 0.0, double b = 1.0) {
    std::uniform_int_distribution<int> count(0, 6);
    std::uniform_real_distribution<double> u(a, b);
    std::vector<double> interior;
    const int k = count(rng);
    for (int i = 0; i < k; ++i) interior.push_back(u(rng));
    std::sort(interior.begin(), interior.end());
    // Occasionally repeat a knot up to the degree.
    if (!interior.empty() && p > 1 && (rng() % 3 == 0)) interior.push_back(interior.front());
    std::sort(interior.begin(), interior.end());
    return KnotVector::clamped(p, a, b, interior);
}

inline NurbsCurve random_curve(std::mt19937_64& rng, int p, bool rational) {
    const KnotVector kv = random_knots(rng, p);
    std::uniform_real_distribution<double> c(-2.0, 2.0), w(0.5, 2.0);
    std::vector<Point2> pts;
    std::vector<double> ws;
    for (int i = 0; i < kv.count(); ++i) {
        pts.emplace_back(c(rng), c(rng));
        ws.push_back(rational ? w(rng) : 1.0);
    }
    return {kv, pts, ws};
}

/// Bilinear patch through four corners, u along SW->SE.
inline NurbsSurface bilinear(const Point2& sw, const Point2& se, const Point2& nw, const Point2& ne) {
    return {KnotVector::clamped(1, 0.0, 1.0), KnotVector::clamped(1, 0.0, 1.0), {sw, se, nw, ne}};
}

/// Nearest of n uniform samples, then ternary search on the bracketing cells.
inline double brute_force_param(const NurbsCurve& c, const Point2& p, int n = 100000) {
    const auto dist = [&](double t) { return (scmatch::curve_eval(c, t) - p).squaredNorm(); };
    const double h = (c.t1() - c.t0()) / n;
    double best = c.t0(), best_d = INFINITY;
    for (int k = 0; k <= n; ++k) {
        const double t = c.t0() + h * k;
        const double d = dist(t);
        if (d < best_d) {
            best_d = d;
            best = t;
        }
    }
    double lo = std::max(c.t0(), best - h), hi = std::min(c.t1(), best + h);
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (dist(m1) < dist(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

}  // namespace testutil
