#include "scmatch/conformal.hpp"

#include "scmatch/error.hpp"
#include "scmatch/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace scmatch {

namespace {

double cross(Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); }

double orient(Complex a, Complex b, Complex c) { return cross(b - a, c - a); }

double segment_distance(Complex p, Complex a, Complex b) {
    const Complex ab = b - a;
    const double len2 = std::norm(ab);
    if (len2 == 0.0) return std::abs(p - a);
    const double s = std::clamp((std::conj(ab) * (p - a)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + s * ab));
}

bool segments_cross(Complex a, Complex b, Complex c, Complex d) {
    const double d1 = orient(c, d, a), d2 = orient(c, d, b);
    const double d3 = orient(a, b, c), d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    const auto on_seg = [](Complex p, Complex q, Complex r) {
        return std::min(p.real(), q.real()) <= r.real() && r.real() <= std::max(p.real(), q.real()) &&
               std::min(p.imag(), q.imag()) <= r.imag() && r.imag() <= std::max(p.imag(), q.imag());
    };
    if (d1 == 0 && on_seg(c, d, a)) return true;
    if (d2 == 0 && on_seg(c, d, b)) return true;
    if (d3 == 0 && on_seg(a, b, c)) return true;
    if (d4 == 0 && on_seg(a, b, d)) return true;
    return false;
}

double signed_area(const std::vector<Complex>& v) {
    double a = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) a += cross(v[k], v[(k + 1) % v.size()]);
    return 0.5 * a;
}

std::vector<double> turning_betas(const std::vector<Complex>& v) {
    const std::size_t n = v.size();
    std::vector<double> betas(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Complex in = v[k] - v[(k + n - 1) % n];
        const Complex out = v[(k + 1) % n] - v[k];
        const double turn = std::arg(out / in);
        if (turn >= std::numbers::pi)
            throw InputError("polygon: cusp (zero interior angle) at vertex " + std::to_string(k));
        betas[k] = -turn / std::numbers::pi;
    }
    return betas;
}

/// Cumulative arc length per knot span with its inverse. Sampling in arc
/// length makes the polygon a function of the geometry alone, so a curve that
/// was only reparameterized polygonizes to the same vertices.
class ArcLength {
public:
    explicit ArcLength(const NurbsCurve& c) : c_(c), rule_(gauss_legendre(24)) {
        t_.push_back(c.t0());
        for (auto [value, mult] : c.knots().interior_breaks()) t_.push_back(value);
        t_.push_back(c.t1());
        s_.push_back(0.0);
        for (std::size_t k = 0; k + 1 < t_.size(); ++k) s_.push_back(s_.back() + integrate(t_[k], t_[k + 1]));
    }

    double total() const { return s_.back(); }
    const std::vector<double>& breaks() const { return t_; }
    double length_at_break(std::size_t k) const { return s_[k]; }

    double param(double s) const {
        if (s <= 0.0) return t_.front();
        if (s >= total()) return t_.back();
        const std::size_t k =
            static_cast<std::size_t>(std::upper_bound(s_.begin() + 1, s_.end() - 1, s) - s_.begin()) - 1;
        double lo = t_[k], hi = t_[k + 1];
        double t = lo + (hi - lo) * (s - s_[k]) / std::max(s_[k + 1] - s_[k], 1e-300);
        for (int it = 0; it < 60; ++it) {
            const double f = s_[k] + integrate(t_[k], t) - s;
            (f > 0.0 ? hi : lo) = t;
            const double v = speed(t);
            double next = v > 0.0 ? t - f / v : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - t) <= 1e-15 * (t_.back() - t_.front())) return next;
            t = next;
        }
        return t;
    }

private:
    double speed(double t) const { return curve_derivative(c_, t, 1).norm(); }

    double integrate(double a, double b) const {
        // Two panels keep the rule accurate where the speed varies quickly.
        double sum = 0.0;
        const double m = 0.5 * (a + b);
        for (auto [lo, hi] : {std::pair{a, m}, std::pair{m, b}}) {
            const double h = 0.5 * (hi - lo), c = 0.5 * (hi + lo);
            for (std::size_t q = 0; q < rule_.nodes.size(); ++q)
                sum += rule_.weights[q] * h * speed(c + h * rule_.nodes[q]);
        }
        return sum;
    }

    const NurbsCurve& c_;
    QuadRule rule_;
    std::vector<double> t_, s_;
};

/// Tangent direction jumps by more than this (radians) mark a corner.
constexpr double kKinkAngle = 1e-3;

bool is_kink(const NurbsCurve& c, double t) {
    const double h = 1e-7 * c.knots().range();
    const Point2 p = curve_eval(c, t);
    const Vector2 left = p - curve_eval(c, t - h), right = curve_eval(c, t + h) - p;
    if (left.norm() == 0.0 || right.norm() == 0.0) return false;
    const double ang = std::atan2(left.x() * right.y() - left.y() * right.x(), left.dot(right));
    return std::abs(ang) > kKinkAngle;
}

void bisect_arc(const NurbsCurve& c, const ArcLength& arc, double sa, const Point2& pa, double sb,
                const Point2& pb, double tol, int depth, std::vector<Point2>& out) {
    constexpr int kProbe = 7;
    double dev = 0.0;
    for (int k = 1; k <= kProbe; ++k) {
        const Point2 q = curve_eval(c, arc.param(sa + (sb - sa) * k / (kProbe + 1)));
        const Vector2 ab = pb - pa;
        const double len2 = ab.squaredNorm();
        const double s = len2 == 0.0 ? 0.0 : std::clamp((q - pa).dot(ab) / len2, 0.0, 1.0);
        dev = std::max(dev, (q - (pa + s * ab)).norm());
    }
    if (dev > tol && depth < 48) {
        const double sm = 0.5 * (sa + sb);
        const Point2 pm = curve_eval(c, arc.param(sm));
        bisect_arc(c, arc, sa, pa, sm, pm, tol, depth + 1, out);
        bisect_arc(c, arc, sm, pm, sb, pb, tol, depth + 1, out);
        return;
    }
    out.push_back(pb);
}

/// Chord-tolerance samples from bisection in arc length, starting from the
/// curve's geometric corners. Endpoints are exact.
std::vector<Point2> sample_geometric(const NurbsCurve& c, double tol) {
    std::vector<Point2> out{curve_eval(c, c.t0())};
    const Point2 end = curve_eval(c, c.t1());
    if (c.bbox_diagonal() == 0.0) return {out.front(), end};
    const ArcLength arc(c);
    std::vector<std::pair<double, Point2>> stops;
    const auto& br = arc.breaks();
    for (std::size_t k = 1; k + 1 < br.size(); ++k)
        if (c.knots().multiplicity(br[k]) >= c.degree() && is_kink(c, br[k]))
            stops.emplace_back(arc.length_at_break(k), curve_eval(c, br[k]));
    stops.emplace_back(arc.total(), end);
    double s0 = 0.0;
    for (const auto& [s1, p1] : stops) {
        bisect_arc(c, arc, s0, out.back(), s1, p1, tol, 0, out);
        s0 = s1;
    }
    return out;
}

}  // namespace

double Polygon::diameter() const {
    double d = 0.0;
    Complex lo = vertices.front(), hi = vertices.front();
    for (const auto& z : vertices) {
        lo = {std::min(lo.real(), z.real()), std::min(lo.imag(), z.imag())};
        hi = {std::max(hi.real(), z.real()), std::max(hi.imag(), z.imag())};
    }
    d = std::abs(hi - lo);
    return d;
}

double boundary_distance(const Polygon& poly, Complex z) {
    double best = std::numeric_limits<double>::infinity();
    const int n = poly.size();
    for (int k = 0; k < n; ++k)
        best = std::min(best, segment_distance(z, poly.vertices[k], poly.vertices[(k + 1) % n]));
    return best;
}

void validate_polygon(const Polygon& poly) {
    const int n = poly.size();
    if (n < 4) throw InputError("polygon: need at least 4 vertices");
    if (static_cast<int>(poly.betas.size()) != n || static_cast<int>(poly.edge_sides.size()) != n)
        throw InputError("polygon: beta/side arrays do not match the vertex count");
    double sum = 0.0;
    for (double b : poly.betas) {
        if (!(b > -1.0 && b <= 1.0)) throw InputError("polygon: turning exponent outside (-1, 1]");
        sum += b;
    }
    if (std::abs(sum + 2.0) > 1e-10) throw InputError("polygon: turning exponents do not sum to -2");
    if (signed_area(poly.vertices) <= 0.0) throw InputError("polygon: not counterclockwise");
    for (int k = 0; k < 4; ++k) {
        const int a = poly.corners[k];
        if (a < 0 || a >= n) throw InputError("polygon: corner index out of range");
    }
    // Cyclic order: walking from corner 0, the others appear in sequence.
    for (int k = 1; k < 4; ++k) {
        const int prev = (poly.corners[k - 1] - poly.corners[0] + n) % n;
        const int cur = (poly.corners[k] - poly.corners[0] + n) % n;
        if (!(cur > prev)) throw InputError("polygon: corners not in cyclic order");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;
            if (segments_cross(poly.vertices[i], poly.vertices[(i + 1) % n], poly.vertices[j],
                               poly.vertices[(j + 1) % n]))
                throw InputError("polygon: self-intersection between edges " + std::to_string(i) +
                                 " and " + std::to_string(j));
        }
    }
}

Polygon polygonize(const Brep& brep, double chord_tol) {
    brep.check_closed(1e-8);
    Polygon poly;
    const auto append = [&](const NurbsCurve& c, bool reverse, Side side) {
        if (!(chord_tol > 0.0)) throw InputError("polygonize: chord tolerance must be positive");
        auto pts = sample_geometric(c, chord_tol);
        if (reverse) std::reverse(pts.begin(), pts.end());
        // Drop the last sample: it is the first sample of the next curve.
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            poly.vertices.emplace_back(pts[k].x(), pts[k].y());
            poly.edge_sides.push_back(side);
        }
    };
    poly.corners[0] = 0;
    append(brep.south, false, Side::South);
    poly.corners[1] = poly.size();
    append(brep.east, false, Side::East);
    poly.corners[2] = poly.size();
    append(brep.north, true, Side::North);
    poly.corners[3] = poly.size();
    append(brep.west, true, Side::West);
    if (poly.size() < 4) throw InputError("polygon: degenerate boundary (fewer than 4 vertices)");
    if (signed_area(poly.vertices) <= 0.0)
        throw InputError("polygon: boundary loop is clockwise; expected counterclockwise");
    poly.betas = turning_betas(poly.vertices);
    validate_polygon(poly);
    return poly;
}

Polygon split_long_edges(const Polygon& poly, const SplitOptions& opts) {
    Polygon cur = poly;
    for (int pass = 0; pass < 64; ++pass) {
        const int n = cur.size();
        std::vector<bool> split(static_cast<std::size_t>(n), false);
        bool any = false;
        for (int e = 0; e < n; ++e) {
            const Complex a = cur.vertices[e], b = cur.vertices[(e + 1) % n];
            const Complex mid = 0.5 * (a + b);
            const double len = std::abs(b - a);
            double dmin = std::numeric_limits<double>::infinity();
            for (int v = 0; v < n; ++v) {
                if (v == e || v == (e + 1) % n) continue;
                dmin = std::min(dmin, std::abs(cur.vertices[v] - mid));
            }
            for (int f = 0; f < n; ++f) {
                if (f == e || f == (e + 1) % n || f == (e + n - 1) % n) continue;
                dmin = std::min(dmin, segment_distance(mid, cur.vertices[f], cur.vertices[(f + 1) % n]));
            }
            if (len > opts.kappa * dmin) {
                split[e] = true;
                any = true;
            }
        }
        if (!any) break;
        Polygon next;
        std::array<int, 4> corner_new{};
        for (int v = 0; v < n; ++v) {
            for (int c = 0; c < 4; ++c)
                if (cur.corners[c] == v) corner_new[c] = next.size();
            next.vertices.push_back(cur.vertices[v]);
            next.betas.push_back(cur.betas[v]);
            next.edge_sides.push_back(cur.edge_sides[v]);
            if (split[v]) {
                next.vertices.push_back(0.5 * (cur.vertices[v] + cur.vertices[(v + 1) % n]));
                next.betas.push_back(0.0);
                next.edge_sides.push_back(cur.edge_sides[v]);
            }
        }
        next.corners = corner_new;
        cur = std::move(next);
    }
    return cur;
}

std::vector<std::array<int, 3>> constrained_delaunay(const Polygon& poly) {
    const int n = poly.size();
    if (n < 3) throw InputError("triangulation: need at least 3 vertices");
    const auto& P = poly.vertices;

    // Ear clipping.
    std::vector<int> ring(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) ring[k] = k;
    std::vector<std::array<int, 3>> tris;
    int guard = 0;
    while (ring.size() > 3) {
        const int m = static_cast<int>(ring.size());
        bool clipped = false;
        for (int k = 0; k < m; ++k) {
            const int a = ring[(k + m - 1) % m], b = ring[k], c = ring[(k + 1) % m];
            if (orient(P[a], P[b], P[c]) <= 0.0) continue;
            bool blocked = false;
            for (int q : ring) {
                if (q == a || q == b || q == c) continue;
                if (orient(P[a], P[b], P[q]) >= 0.0 && orient(P[b], P[c], P[q]) >= 0.0 &&
                    orient(P[c], P[a], P[q]) >= 0.0) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            tris.push_back({a, b, c});
            ring.erase(ring.begin() + k);
            clipped = true;
            break;
        }
        if (!clipped || ++guard > 4 * n)
            throw InputError("triangulation: no ear found (degenerate or self-intersecting polygon)");
    }
    if (orient(P[ring[0]], P[ring[1]], P[ring[2]]) <= 0.0)
        throw InputError("triangulation: degenerate (collinear) polygon");
    tris.push_back({ring[0], ring[1], ring[2]});

    // Lawson flips on interior edges until every one is locally Delaunay.
    const auto is_boundary = [n](int u, int v) {
        return (v - u + n) % n == 1 || (u - v + n) % n == 1;
    };
    const auto in_circle = [&](int a, int b, int c, int d) {
        const Complex pa = P[a] - P[d], pb = P[b] - P[d], pc = P[c] - P[d];
        const double det = std::norm(pa) * cross(pb, pc) - std::norm(pb) * cross(pa, pc) +
                           std::norm(pc) * cross(pa, pb);
        const double r = std::max({std::abs(pa), std::abs(pb), std::abs(pc)});
        return det > 1e-12 * r * r * r * r;
    };
    for (int sweep = 0; sweep < 10 * n; ++sweep) {
        std::map<std::pair<int, int>, int> owner;
        for (int t = 0; t < static_cast<int>(tris.size()); ++t)
            for (int e = 0; e < 3; ++e) owner[{tris[t][e], tris[t][(e + 1) % 3]}] = t;
        bool flipped = false;
        for (int t = 0; t < static_cast<int>(tris.size()) && !flipped; ++t) {
            for (int e = 0; e < 3 && !flipped; ++e) {
                const int a = tris[t][e], c = tris[t][(e + 1) % 3], x = tris[t][(e + 2) % 3];
                if (is_boundary(a, c)) continue;
                auto it = owner.find({c, a});
                if (it == owner.end()) continue;
                const auto& other = tris[it->second];
                int y = -1;
                for (int v : other)
                    if (v != a && v != c) y = v;
                // Triangle (a, c, x) and (c, a, y); flip to (x, y) if y is inside circle(a, c, x).
                if (!in_circle(a, c, x, y)) continue;
                if (orient(P[x], P[a], P[y]) <= 0.0 || orient(P[y], P[c], P[x]) <= 0.0) continue;
                const int u = it->second;
                tris[t] = {x, a, y};
                tris[u] = {y, c, x};
                flipped = true;
            }
        }
        if (!flipped) break;
    }
    return tris;
}

QuadSet delaunay_quads(const Polygon& poly) {
    const int n = poly.size();
    if (n < 4) throw InputError("delaunay_quads: need at least 4 vertices");
    const auto tris = constrained_delaunay(poly);
    std::map<std::pair<int, int>, int> owner;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
        for (int e = 0; e < 3; ++e) owner[{tris[t][e], tris[t][(e + 1) % 3]}] = t;
    QuadSet qs;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int e = 0; e < 3; ++e) {
            const int a = tris[t][e], c = tris[t][(e + 1) % 3], x = tris[t][(e + 2) % 3];
            if ((c - a + n) % n == 1 || (a - c + n) % n == 1) continue;
            if (a > c) continue;  // each diagonal once
            auto it = owner.find({c, a});
            if (it == owner.end()) throw InputError("delaunay_quads: inconsistent triangulation");
            int y = -1;
            for (int v : tris[it->second])
                if (v != a && v != c) y = v;
            qs.diagonals.push_back({a, c});
            qs.quads.push_back({a, y, c, x});
        }
    }
    if (static_cast<int>(qs.diagonals.size()) != n - 3)
        throw InputError("delaunay_quads: expected n-3 diagonals");
    // Deterministic order independent of the map iteration above.
    std::vector<std::size_t> order(qs.quads.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return qs.diagonals[i] < qs.diagonals[j]; });
    QuadSet sorted;
    for (auto k : order) {
        sorted.diagonals.push_back(qs.diagonals[k]);
        sorted.quads.push_back(qs.quads[k]);
        const auto& q = qs.quads[k];
        sorted.target_logs.push_back(std::log(std::abs(
            cross_ratio(poly.vertices[q[0]], poly.vertices[q[1]], poly.vertices[q[2]], poly.vertices[q[3]]))));
    }
    return sorted;
}

}  // namespace scmatch
