#include "scmatch/splines.hpp"

#include "scmatch/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace scmatch {

namespace {

using Hom = Eigen::Vector3d;  // (w x, w y, w)

Hom to_hom(const Point2& p, double w) { return {w * p.x(), w * p.y(), w}; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- KnotVector

KnotVector::KnotVector(std::vector<double> values, int degree)
    : values_(std::move(values)), degree_(degree) {
    if (degree_ < 0) throw InputError("knot vector: negative degree");
    const auto p1 = static_cast<std::size_t>(degree_ + 1);
    if (values_.size() < 2 * p1)
        throw InputError("knot vector: need at least 2(p+1) knots, got " +
                         std::to_string(values_.size()));
    for (std::size_t k = 1; k < values_.size(); ++k) {
        if (!(values_[k] >= values_[k - 1]))
            throw InputError("knot vector: non-monotone knots at index " + std::to_string(k));
    }
    if (!(values_.back() > values_.front()))
        throw InputError("knot vector: empty parameter range");
    for (std::size_t k = 1; k < p1; ++k) {
        if (values_[k] != values_[0] || values_[values_.size() - 1 - k] != values_.back())
            throw InputError("knot vector: not clamped (end multiplicity must be p+1)");
    }
    for (std::size_t k = p1; k + p1 < values_.size(); ++k) {
        if (values_[k] == values_.front() || values_[k] == values_.back())
            throw InputError("knot vector: end multiplicity exceeds p+1");
    }
}

KnotVector KnotVector::clamped(int degree, double a, double b,
                               const std::vector<double>& interior) {
    std::vector<double> v(static_cast<std::size_t>(degree + 1), a);
    v.insert(v.end(), interior.begin(), interior.end());
    v.insert(v.end(), static_cast<std::size_t>(degree + 1), b);
    return {std::move(v), degree};
}

int KnotVector::find_span(double t) const {
    const int n = count() - 1;
    if (t >= values_[static_cast<std::size_t>(n + 1)]) return n;
    if (t <= values_[static_cast<std::size_t>(degree_)]) return degree_;
    auto it = std::upper_bound(values_.begin(), values_.end(), t);
    return static_cast<int>(it - values_.begin()) - 1;
}

int KnotVector::multiplicity(double t) const {
    const double tol = kKnotSnapTol * range();
    return static_cast<int>(std::count_if(values_.begin(), values_.end(),
                                          [&](double k) { return std::abs(k - t) <= tol; }));
}

double KnotVector::snap(double t) const {
    const double tol = kKnotSnapTol * range();
    for (double k : values_)
        if (std::abs(k - t) <= tol) return k;
    return t;
}

std::vector<std::pair<double, int>> KnotVector::interior_breaks() const {
    std::vector<std::pair<double, int>> out;
    for (std::size_t k = static_cast<std::size_t>(degree_ + 1);
         k + static_cast<std::size_t>(degree_ + 1) < values_.size(); ++k) {
        if (!out.empty() && out.back().first == values_[k])
            ++out.back().second;
        else
            out.emplace_back(values_[k], 1);
    }
    return out;
}

void KnotVector::basis_funs(int span, double t, std::span<double> out) const {
    const int p = degree_;
    std::array<double, 32> left{}, right{};
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - values_[static_cast<std::size_t>(span + 1 - j)];
        right[j] = values_[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

std::vector<std::vector<double>> KnotVector::ders_basis_funs(int span, double t, int n) const {
    const int p = degree_;
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1), right(p + 1);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - values_[static_cast<std::size_t>(span + 1 - j)];
        right[j] = values_[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    std::vector<std::vector<double>> ders(n + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= n; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    int r = p;
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= r;
        r *= (p - k);
    }
    return ders;
}

std::vector<double> KnotVector::greville() const {
    std::vector<double> g(static_cast<std::size_t>(count()));
    for (int i = 0; i < count(); ++i) {
        if (degree_ == 0) {
            g[i] = 0.5 * (values_[i] + values_[i + 1]);
            continue;
        }
        double s = 0.0;
        for (int k = 1; k <= degree_; ++k) s += values_[static_cast<std::size_t>(i + k)];
        g[i] = s / degree_;
    }
    return g;
}

double basis_eval(const KnotVector& knots, int i, double t) {
    if (i < 0 || i >= knots.count())
        throw InputError("basis_eval: index " + std::to_string(i) + " out of range");
    if (!knots.contains(t)) throw InputError("basis_eval: parameter " + fmt(t) + " outside knot span");
    const int p = knots.degree();
    const int span = knots.find_span(t);
    if (i < span - p || i > span) return 0.0;
    std::array<double, 32> N{};
    knots.basis_funs(span, t, std::span<double>(N.data(), static_cast<std::size_t>(p + 1)));
    return N[i - span + p];
}

// ---------------------------------------------------------------- NurbsCurve

NurbsCurve::NurbsCurve(KnotVector knots, std::vector<Point2> control_points,
                       std::vector<double> weights)
    : knots_(std::move(knots)), ctrl_(std::move(control_points)), weights_(std::move(weights)) {
    if (weights_.empty()) weights_.assign(ctrl_.size(), 1.0);
    if (static_cast<int>(ctrl_.size()) != knots_.count())
        throw InputError("curve: control point count " + std::to_string(ctrl_.size()) +
                         " does not match knots (expected " + std::to_string(knots_.count()) + ")");
    if (weights_.size() != ctrl_.size()) throw InputError("curve: weight count mismatch");
    for (double w : weights_)
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("curve: nonpositive weight");
    for (const auto& p : ctrl_)
        if (!p.allFinite()) throw InputError("curve: non-finite control point");
}

bool NurbsCurve::is_rational() const noexcept {
    return std::any_of(weights_.begin(), weights_.end(), [](double w) { return w != 1.0; });
}

double NurbsCurve::bbox_diagonal() const {
    Point2 lo = ctrl_.front(), hi = ctrl_.front();
    for (const auto& p : ctrl_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

NurbsCurve NurbsCurve::reversed() const {
    const auto& U = knots_.values();
    const double a = U.front(), b = U.back();
    std::vector<double> rk(U.size());
    for (std::size_t k = 0; k < U.size(); ++k) rk[k] = a + b - U[U.size() - 1 - k];
    for (int k = 0; k <= degree(); ++k) {
        rk[k] = a;
        rk[rk.size() - 1 - k] = b;
    }
    std::vector<Point2> rc(ctrl_.rbegin(), ctrl_.rend());
    std::vector<double> rw(weights_.rbegin(), weights_.rend());
    return {KnotVector(std::move(rk), degree()), std::move(rc), std::move(rw)};
}

namespace {

void require_in_range(const NurbsCurve& c, double t, const char* op) {
    if (!(t >= c.t0() && t <= c.t1()))
        throw InputError(std::string(op) + ": parameter " + fmt(t) + " outside [" + fmt(c.t0()) +
                         ", " + fmt(c.t1()) + "]");
}

}  // namespace

Point2 curve_eval(const NurbsCurve& curve, double t) {
    require_in_range(curve, t, "curve_eval");
    const auto& K = curve.knots();
    const int p = K.degree();
    const int span = K.find_span(t);
    std::array<double, 32> N{};
    K.basis_funs(span, t, std::span<double>(N.data(), static_cast<std::size_t>(p + 1)));
    Hom acc = Hom::Zero();
    for (int j = 0; j <= p; ++j) {
        const int i = span - p + j;
        acc += N[j] * to_hom(curve.control_points()[i], curve.weights()[i]);
    }
    return acc.head<2>() / acc.z();
}

CurveDerivs curve_derivs(const NurbsCurve& curve, double t) {
    require_in_range(curve, t, "curve_derivative");
    const auto& K = curve.knots();
    const int p = K.degree();
    const int span = K.find_span(t);
    const int nd = std::min(2, p);
    const auto ders = K.ders_basis_funs(span, t, nd);
    std::array<Hom, 3> A{Hom::Zero(), Hom::Zero(), Hom::Zero()};
    for (int k = 0; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j) {
            const int i = span - p + j;
            A[k] += ders[k][j] * to_hom(curve.control_points()[i], curve.weights()[i]);
        }
    }
    CurveDerivs out;
    const double w = A[0].z();
    out.point = A[0].head<2>() / w;
    out.d1 = (A[1].head<2>() - A[1].z() * out.point) / w;
    out.d2 = (A[2].head<2>() - 2.0 * A[1].z() * out.d1 - A[2].z() * out.point) / w;
    return out;
}

Vector2 curve_derivative(const NurbsCurve& curve, double t, int order) {
    if (order != 1 && order != 2) throw InputError("curve_derivative: order must be 1 or 2");
    const auto d = curve_derivs(curve, t);
    return order == 1 ? d.d1 : d.d2;
}

NurbsCurve knot_insert(const NurbsCurve& curve, double t, int times) {
    if (times < 0) throw InputError("knot_insert: negative insertion count");
    if (times == 0) return curve;
    const auto& K = curve.knots();
    if (!(t > K.front() && t < K.back()))
        throw InputError("knot_insert: parameter " + fmt(t) + " not strictly inside the knot range");
    t = K.snap(t);
    const int p = K.degree();
    const int s = K.multiplicity(t);
    if (s + times > p)
        throw InputError("knot_insert: multiplicity overflow (" + std::to_string(s) + " + " +
                         std::to_string(times) + " > " + std::to_string(p) + ")");
    const auto& UP = K.values();
    const int np = curve.size() - 1;
    const int mp = np + p + 1;
    const int k = K.find_span(t);
    const int r = times;

    std::vector<double> UQ(static_cast<std::size_t>(mp + r + 1));
    for (int i = 0; i <= k; ++i) UQ[i] = UP[i];
    for (int i = 1; i <= r; ++i) UQ[k + i] = t;
    for (int i = k + 1; i <= mp; ++i) UQ[i + r] = UP[i];

    std::vector<Hom> P(static_cast<std::size_t>(np + 1));
    for (int i = 0; i <= np; ++i) P[i] = to_hom(curve.control_points()[i], curve.weights()[i]);
    std::vector<Hom> Q(static_cast<std::size_t>(np + r + 1));
    for (int i = 0; i <= k - p; ++i) Q[i] = P[i];
    for (int i = k - s; i <= np; ++i) Q[i + r] = P[i];
    std::vector<Hom> R(static_cast<std::size_t>(p + 1));
    for (int i = 0; i <= p - s; ++i) R[i] = P[k - p + i];
    int L = 0;
    for (int j = 1; j <= r; ++j) {
        L = k - p + j;
        for (int i = 0; i <= p - j - s; ++i) {
            const double alpha = (t - UP[L + i]) / (UP[i + k + 1] - UP[L + i]);
            R[i] = alpha * R[i + 1] + (1.0 - alpha) * R[i];
        }
        Q[L] = R[0];
        Q[k + r - j - s] = R[p - j - s];
    }
    for (int i = L + 1; i < k - s; ++i) Q[i] = R[i - L];

    std::vector<Point2> pts(Q.size());
    std::vector<double> ws(Q.size());
    const bool rational = curve.is_rational();
    for (std::size_t i = 0; i < Q.size(); ++i) {
        ws[i] = rational ? Q[i].z() : 1.0;
        pts[i] = Q[i].head<2>() / Q[i].z();
    }
    return {KnotVector(std::move(UQ), p), std::move(pts), std::move(ws)};
}

NurbsCurve degree_elevate(const NurbsCurve& curve, int target_degree) {
    const int p = curve.degree();
    if (target_degree < p)
        throw InputError("degree_elevate: target degree " + std::to_string(target_degree) +
                         " below current degree " + std::to_string(p));
    if (target_degree == p) return curve;
    const int dq = target_degree - p;
    const auto& K = curve.knots();
    std::vector<double> interior;
    for (auto [value, mult] : K.interior_breaks())
        interior.insert(interior.end(), static_cast<std::size_t>(mult + dq), value);
    const auto newK = KnotVector::clamped(target_degree, K.front(), K.back(), interior);
    const int n = newK.count();
    const auto g = newK.greville();

    // The old curve lies in the new spline space, so collocation at the
    // Greville abscissae reproduces it exactly (in homogeneous coordinates).
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd rhs(n, 3);
    std::array<double, 32> N{};
    std::array<double, 32> Nold{};
    for (int r = 0; r < n; ++r) {
        const double t = g[r];
        const int span = newK.find_span(t);
        newK.basis_funs(span, t, std::span<double>(N.data(), static_cast<std::size_t>(target_degree + 1)));
        for (int j = 0; j <= target_degree; ++j) M(r, span - target_degree + j) = N[j];
        const int os = K.find_span(t);
        K.basis_funs(os, t, std::span<double>(Nold.data(), static_cast<std::size_t>(p + 1)));
        Hom acc = Hom::Zero();
        for (int j = 0; j <= p; ++j) {
            const int i = os - p + j;
            acc += Nold[j] * to_hom(curve.control_points()[i], curve.weights()[i]);
        }
        rhs.row(r) = acc.transpose();
    }
    const bool rational = curve.is_rational();
    if (!rational) {
        // Homogeneous weight row is identically 1; solve only for x,y.
        rhs.col(2).setOnes();
    }
    Eigen::MatrixXd sol = M.partialPivLu().solve(rhs);
    std::vector<Point2> pts(static_cast<std::size_t>(n));
    std::vector<double> ws(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n; ++i) {
        if (rational) {
            ws[i] = sol(i, 2);
            pts[i] = sol.row(i).head<2>().transpose() / ws[i];
        } else {
            pts[i] = sol.row(i).head<2>().transpose();
        }
    }
    // End control points are interpolated exactly.
    pts.front() = curve.front();
    pts.back() = curve.back();
    ws.front() = curve.weights().front();
    ws.back() = curve.weights().back();
    return {newK, std::move(pts), std::move(ws)};
}

NurbsCurve affine_reparam(const NurbsCurve& curve, double s, double t) {
    if (!(s > 0.0)) throw InputError("affine_reparam: scale must be positive, got " + fmt(s));
    if (s == 1.0 && t == 0.0) return curve;
    std::vector<double> v = curve.knots().values();
    for (double& k : v) k = s * k + t;
    return {KnotVector(std::move(v), curve.degree()), curve.control_points(), curve.weights()};
}

NurbsCurve reparam_to_range(const NurbsCurve& curve, double a, double b) {
    if (!(b > a)) throw InputError("reparam_to_range: empty target range");
    if (curve.t0() == a && curve.t1() == b) return curve;
    const double s = (b - a) / (curve.t1() - curve.t0());
    const double t = a - s * curve.t0();
    std::vector<double> v = curve.knots().values();
    const int p = curve.degree();
    for (double& k : v) k = s * k + t;
    for (int k = 0; k <= p; ++k) {
        v[k] = a;
        v[v.size() - 1 - k] = b;
    }
    // Interior knots pushed onto an end by roundoff stay strictly inside.
    for (std::size_t k = static_cast<std::size_t>(p + 1); k + static_cast<std::size_t>(p + 1) < v.size(); ++k)
        v[k] = std::clamp(v[k], std::nextafter(a, b), std::nextafter(b, a));
    return {KnotVector(std::move(v), p), curve.control_points(), curve.weights()};
}

std::pair<NurbsCurve, NurbsCurve> split_curve(const NurbsCurve& curve, double t) {
    const auto& K0 = curve.knots();
    const double tol = kKnotSnapTol * K0.range();
    if (!(t > K0.front() + tol && t < K0.back() - tol))
        throw InputError("split_curve: parameter " + fmt(t) + " not strictly inside the knot range");
    t = K0.snap(t);
    const int p = curve.degree();
    const int s = K0.multiplicity(t);
    const NurbsCurve c = s < p ? knot_insert(curve, t, p - s) : curve;
    const auto& U = c.knots().values();
    // First occurrence of t.
    const int r = static_cast<int>(std::lower_bound(U.begin(), U.end(), t) - U.begin());

    std::vector<double> lk(U.begin(), U.begin() + r);
    lk.insert(lk.end(), static_cast<std::size_t>(p + 1), t);
    std::vector<Point2> lp(c.control_points().begin(), c.control_points().begin() + r);
    std::vector<double> lw(c.weights().begin(), c.weights().begin() + r);

    const int mult = c.knots().multiplicity(t);
    std::vector<double> rk(static_cast<std::size_t>(p + 1), t);
    rk.insert(rk.end(), U.begin() + r + mult, U.end());
    std::vector<Point2> rp(c.control_points().begin() + (r - 1), c.control_points().end());
    std::vector<double> rw(c.weights().begin() + (r - 1), c.weights().end());

    if (p == 0) throw InputError("split_curve: degree 0 curves are not supported");
    return {NurbsCurve(KnotVector(std::move(lk), p), std::move(lp), std::move(lw)),
            NurbsCurve(KnotVector(std::move(rk), p), std::move(rp), std::move(rw))};
}

NurbsCurve merge_curves(std::span<const NurbsCurve> segments) {
    if (segments.empty()) throw InputError("merge_curves: no segments");
    if (segments.size() == 1) return segments.front();
    const int p = segments.front().degree();
    std::vector<double> knots;
    std::vector<Point2> pts;
    std::vector<double> ws;
    double scale = 1.0;
    for (const auto& seg : segments) scale = std::max(scale, seg.bbox_diagonal());
    double total_range = segments.back().t1() - segments.front().t0();
    if (!(total_range > 0.0)) total_range = 1.0;
    double wscale = 1.0;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& seg = segments[k];
        if (seg.degree() != p)
            throw InputError("merge_curves: degree mismatch at segment " + std::to_string(k));
        const auto& U = seg.knots().values();
        if (k == 0) {
            knots.assign(U.begin(), U.end() - 1);
            pts = seg.control_points();
            ws = seg.weights();
            continue;
        }
        const double gap = seg.t0() - segments[k - 1].t1();
        const double tol = 1e-13 * std::max(1.0, std::abs(total_range));
        if (gap > tol) throw InputError("merge_curves: parameter gap between segments " +
                                        std::to_string(k - 1) + " and " + std::to_string(k));
        if (gap < -tol) throw InputError("merge_curves: parameter overlap between segments " +
                                         std::to_string(k - 1) + " and " + std::to_string(k));
        if ((seg.front() - pts.back()).norm() > 1e-10 * scale)
            throw InputError("merge_curves: endpoint mismatch between segments " +
                             std::to_string(k - 1) + " and " + std::to_string(k));
        // A uniform weight scale leaves a rational segment unchanged.
        wscale = ws.back() / seg.weights().front();
        knots.insert(knots.end(), U.begin() + (p + 1), U.end() - 1);
        pts.insert(pts.end(), seg.control_points().begin() + 1, seg.control_points().end());
        for (std::size_t i = 1; i < seg.weights().size(); ++i) ws.push_back(seg.weights()[i] * wscale);
    }
    knots.push_back(segments.back().t1());
    return {KnotVector(std::move(knots), p), std::move(pts), std::move(ws)};
}

// ------------------------------------------------------------ closest point

namespace {

double proj_residual(const CurveDerivs& d, const Point2& p) { return (d.point - p).dot(d.d1); }

}  // namespace

namespace {

/// Newton from the guess with a golden-section fallback; may stop in a local minimum.
ClosestPointResult closest_point_local(const NurbsCurve& curve, const Point2& p, double guess, int max_iter) {
    const double a = curve.t0(), b = curve.t1();
    const double diag = std::max(curve.bbox_diagonal(), (p - curve.front()).norm());
    const auto converged_at = [&](double t, const CurveDerivs& d) {
        const double f = proj_residual(d, p);
        const double scale = std::max(d.d1.norm(), 1e-300) * std::max(diag, 1e-300);
        if (std::abs(f) <= 1e-10 * scale) return true;
        if (t == a && f >= 0.0) return true;
        if (t == b && f <= 0.0) return true;
        return false;
    };

    ClosestPointResult res;
    double t = guess;
    double best_t = t;
    double best_dist = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int it = 0; it < max_iter; ++it) {
        const auto d = curve_derivs(curve, t);
        const double dist = (d.point - p).norm();
        if (dist < best_dist - 1e-15 * diag) {
            best_dist = dist;
            best_t = t;
            stagnant = 0;
        } else {
            ++stagnant;
        }
        res.iterations = it + 1;
        if (converged_at(t, d)) {
            res.param = t;
            res.distance = dist;
            res.residual = std::abs(proj_residual(d, p));
            res.converged = true;
            res.clamped = (t == a || t == b);
            return res;
        }
        if (stagnant > 5) break;
        const double f = proj_residual(d, p);
        double fp = d.d1.squaredNorm() + (d.point - p).dot(d.d2);
        if (!(fp > 0.0)) fp = d.d1.squaredNorm();
        if (!(fp > 0.0)) break;
        double tn = std::clamp(t - f / fp, a, b);
        if (tn == t) break;
        t = tn;
    }

    // Globalization: best uniform sample, then golden-section refinement.
    constexpr int kSamples = 256;
    int kbest = 0;
    double dbest = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kSamples; ++k) {
        const double tk = a + (b - a) * k / kSamples;
        const double dk = (curve_eval(curve, tk) - p).squaredNorm();
        if (dk < dbest) {
            dbest = dk;
            kbest = k;
        }
    }
    double lo = a + (b - a) * std::max(0, kbest - 1) / kSamples;
    double hi = a + (b - a) * std::min(kSamples, kbest + 1) / kSamples;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    auto dist2 = [&](double x) { return (curve_eval(curve, x) - p).squaredNorm(); };
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = dist2(x1), f2 = dist2(x2);
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * (b - a); ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = dist2(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = dist2(x2);
        }
    }
    t = 0.5 * (lo + hi);
    if (dist2(a) <= dist2(t)) t = a;
    if (dist2(b) <= dist2(t)) t = b;
    // Polish with a few Newton steps from the bracketed minimizer.
    for (int it = 0; it < 10; ++it) {
        const auto d = curve_derivs(curve, t);
        if (converged_at(t, d)) break;
        double fp = d.d1.squaredNorm() + (d.point - p).dot(d.d2);
        if (!(fp > 0.0)) break;
        const double tn = std::clamp(t - proj_residual(d, p) / fp, a, b);
        if (dist2(tn) > dist2(t)) break;
        t = tn;
    }
    const auto d = curve_derivs(curve, t);
    if ((d.point - p).norm() > best_dist) {
        // Newton had found a better local point than the global search.
        t = best_t;
    }
    const auto df = curve_derivs(curve, t);
    res.param = t;
    res.distance = (df.point - p).norm();
    res.residual = std::abs(proj_residual(df, p));
    res.converged = converged_at(t, df);
    res.clamped = (t == a || t == b);
    return res;
}

}  // namespace

ClosestPointResult closest_point(const NurbsCurve& curve, const Point2& p, double guess, int max_iter) {
    require_in_range(curve, guess, "closest_point");
    ClosestPointResult res = closest_point_local(curve, p, guess, max_iter);
    // A coarse scan catches a guess that sat in the basin of a farther local minimum.
    constexpr int kScan = 256;
    const double a = curve.t0(), b = curve.t1();
    double t_scan = a, d_scan = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kScan; ++k) {
        const double tk = a + (b - a) * k / kScan;
        const double dk = (curve_eval(curve, tk) - p).norm();
        if (dk < d_scan) {
            d_scan = dk;
            t_scan = tk;
        }
    }
    // Always polish from the best sample and its neighbours: at a tangent kink the
    // one-sided residual can vanish, so a converged local answer is not proof of a
    // minimum, and the true foot may sit on the far side of the kink.
    if (res.distance > 0.0) {
        const double h = (b - a) / kScan;
        int iters = res.iterations;
        for (double t0 : {t_scan, std::max(a, t_scan - h), std::min(b, t_scan + h)}) {
            ClosestPointResult alt = closest_point_local(curve, p, t0, max_iter);
            iters += alt.iterations;
            if (alt.distance < res.distance) res = alt;
        }
        res.iterations = iters;
    }
    return res;
}

// ----------------------------------------------------------- adaptive sampling

namespace {

double point_segment_distance(const Point2& x, const Point2& a, const Point2& b) {
    const Vector2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (x - a).norm();
    const double s = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
    return (x - (a + s * ab)).norm();
}

void bisect(const NurbsCurve& c, double ta, const Point2& pa, double tb, const Point2& pb,
            double tol, int depth, Polyline& out) {
    constexpr int kProbe = 7;
    double dev = 0.0;
    for (int k = 1; k <= kProbe; ++k) {
        const double t = ta + (tb - ta) * k / (kProbe + 1);
        dev = std::max(dev, point_segment_distance(curve_eval(c, t), pa, pb));
    }
    if (dev > tol && depth < 48) {
        const double tm = 0.5 * (ta + tb);
        const Point2 pm = curve_eval(c, tm);
        bisect(c, ta, pa, tm, pm, tol, depth + 1, out);
        bisect(c, tm, pm, tb, pb, tol, depth + 1, out);
        return;
    }
    out.params.push_back(tb);
    out.points.push_back(pb);
}

}  // namespace

Polyline sample_adaptive(const NurbsCurve& curve, double chord_tol) {
    if (!(chord_tol > 0.0)) throw InputError("sample_adaptive: chord tolerance must be positive");
    Polyline out;
    out.params.push_back(curve.t0());
    out.points.push_back(curve_eval(curve, curve.t0()));
    if (curve.bbox_diagonal() == 0.0) {
        out.params.push_back(curve.t1());
        out.points.push_back(curve_eval(curve, curve.t1()));
        out.degenerate = true;
        return out;
    }
    std::vector<double> breaks{curve.t0()};
    const int p = curve.degree();
    for (auto [value, mult] : curve.knots().interior_breaks())
        if (mult >= p) breaks.push_back(value);
    breaks.push_back(curve.t1());
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double ta = breaks[k], tb = breaks[k + 1];
        bisect(curve, ta, out.points.back(), tb, curve_eval(curve, tb), chord_tol, 0, out);
    }
    return out;
}

// --------------------------------------------------------------- NurbsSurface

NurbsSurface::NurbsSurface(KnotVector knots_u, KnotVector knots_v, std::vector<Point2> control_net,
                           std::vector<double> weights)
    : ku_(std::move(knots_u)), kv_(std::move(knots_v)), net_(std::move(control_net)),
      weights_(std::move(weights)) {
    if (weights_.empty()) weights_.assign(net_.size(), 1.0);
    const auto expected = static_cast<std::size_t>(ku_.count()) * static_cast<std::size_t>(kv_.count());
    if (net_.size() != expected)
        throw InputError("surface: control net size " + std::to_string(net_.size()) +
                         " does not match knots (expected " + std::to_string(expected) + ")");
    if (weights_.size() != net_.size()) throw InputError("surface: weight grid size mismatch");
    for (double w : weights_)
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("surface: nonpositive weight");
}

bool NurbsSurface::is_rational() const noexcept {
    return std::any_of(weights_.begin(), weights_.end(), [](double w) { return w != 1.0; });
}

NurbsCurve NurbsSurface::row(int j) const {
    std::vector<Point2> p(static_cast<std::size_t>(count_u()));
    std::vector<double> w(p.size());
    for (int i = 0; i < count_u(); ++i) {
        p[i] = control(i, j);
        w[i] = weight(i, j);
    }
    return {ku_, std::move(p), std::move(w)};
}

NurbsCurve NurbsSurface::column(int i) const {
    std::vector<Point2> p(static_cast<std::size_t>(count_v()));
    std::vector<double> w(p.size());
    for (int j = 0; j < count_v(); ++j) {
        p[j] = control(i, j);
        w[j] = weight(i, j);
    }
    return {kv_, std::move(p), std::move(w)};
}

NurbsSurface NurbsSurface::from_rows(const std::vector<NurbsCurve>& rows, const KnotVector& knots_v) {
    const auto& ku = rows.front().knots();
    const int nu = ku.count();
    std::vector<Point2> net;
    std::vector<double> w;
    net.reserve(rows.size() * static_cast<std::size_t>(nu));
    for (const auto& r : rows) {
        if (r.knots().values() != ku.values()) throw InputError("surface: rows with differing knots");
        net.insert(net.end(), r.control_points().begin(), r.control_points().end());
        w.insert(w.end(), r.weights().begin(), r.weights().end());
    }
    return {ku, knots_v, std::move(net), std::move(w)};
}

NurbsSurface NurbsSurface::from_columns(const std::vector<NurbsCurve>& cols,
                                        const KnotVector& knots_u) {
    const auto& kv = cols.front().knots();
    const int nu = static_cast<int>(cols.size());
    const int nv = kv.count();
    std::vector<Point2> net(static_cast<std::size_t>(nu * nv));
    std::vector<double> w(net.size());
    for (int i = 0; i < nu; ++i) {
        if (cols[i].knots().values() != kv.values())
            throw InputError("surface: columns with differing knots");
        for (int j = 0; j < nv; ++j) {
            net[i + j * nu] = cols[i].control_points()[j];
            w[i + j * nu] = cols[i].weights()[j];
        }
    }
    return {knots_u, kv, std::move(net), std::move(w)};
}

SurfaceDerivs surface_derivs(const NurbsSurface& s, double u, double v) {
    const auto& KU = s.knots_u();
    const auto& KV = s.knots_v();
    if (!KU.contains(u) || !KV.contains(v))
        throw InputError("surface evaluation: parameter (" + fmt(u) + ", " + fmt(v) + ") out of range");
    const int p = KU.degree(), q = KV.degree();
    const int su = KU.find_span(u), sv = KV.find_span(v);
    const auto Nu = KU.ders_basis_funs(su, u, std::min(1, p));
    const auto Nv = KV.ders_basis_funs(sv, v, std::min(1, q));
    Hom A = Hom::Zero(), Au = Hom::Zero(), Av = Hom::Zero();
    bool polynomial = true;
    for (int b = 0; b <= q; ++b) {
        const int j = sv - q + b;
        for (int a = 0; a <= p; ++a) {
            const int i = su - p + a;
            polynomial = polynomial && s.weight(i, j) == 1.0;
            const Hom h = to_hom(s.control(i, j), s.weight(i, j));
            A += Nu[0][a] * Nv[0][b] * h;
            if (p > 0) Au += Nu[1][a] * Nv[0][b] * h;
            if (q > 0) Av += Nu[0][a] * Nv[1][b] * h;
        }
    }
    SurfaceDerivs d;
    if (polynomial) {
        // Unit weights: skip the quotient rule and its rounding.
        d.point = A.head<2>();
        d.du = Au.head<2>();
        d.dv = Av.head<2>();
        return d;
    }
    d.point = A.head<2>() / A.z();
    d.du = (Au.head<2>() - Au.z() * d.point) / A.z();
    d.dv = (Av.head<2>() - Av.z() * d.point) / A.z();
    return d;
}

Point2 surface_eval(const NurbsSurface& s, double u, double v) { return surface_derivs(s, u, v).point; }

NurbsSurface surface_insert_knot_u(const NurbsSurface& s, double t, int times) {
    std::vector<NurbsCurve> rows;
    for (int j = 0; j < s.count_v(); ++j) rows.push_back(knot_insert(s.row(j), t, times));
    return NurbsSurface::from_rows(rows, s.knots_v());
}

NurbsSurface surface_insert_knot_v(const NurbsSurface& s, double t, int times) {
    std::vector<NurbsCurve> cols;
    for (int i = 0; i < s.count_u(); ++i) cols.push_back(knot_insert(s.column(i), t, times));
    return NurbsSurface::from_columns(cols, s.knots_u());
}

NurbsSurface surface_elevate_u(const NurbsSurface& s, int target_degree) {
    std::vector<NurbsCurve> rows;
    for (int j = 0; j < s.count_v(); ++j) rows.push_back(degree_elevate(s.row(j), target_degree));
    return NurbsSurface::from_rows(rows, s.knots_v());
}

NurbsSurface surface_elevate_v(const NurbsSurface& s, int target_degree) {
    std::vector<NurbsCurve> cols;
    for (int i = 0; i < s.count_u(); ++i) cols.push_back(degree_elevate(s.column(i), target_degree));
    return NurbsSurface::from_columns(cols, s.knots_u());
}

}  // namespace scmatch
