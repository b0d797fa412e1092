#pragma once

// NURBS/B-spline kernel for planar boundary curves and tensor-product
// surfaces. Knot vectors are always clamped; spans are half-open except the
// last one, which is closed so both end control points are interpolated.

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace scmatch {

using Point2 = Eigen::Vector2d;
using Vector2 = Eigen::Vector2d;

/// Knots closer than this fraction of the parameter range are treated as equal.
inline constexpr double kKnotSnapTol = 1e-10;

class KnotVector {
public:
    KnotVector() = default;
    /// Validates monotonicity, clamping and length; throws InputError.
    KnotVector(std::vector<double> values, int degree);

    /// Clamped knot vector on [a,b] with the given interior knots.
    static KnotVector clamped(int degree, double a, double b,
                              const std::vector<double>& interior = {});

    int degree() const noexcept { return degree_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }

    /// Number of basis functions.
    int count() const noexcept { return static_cast<int>(values_.size()) - degree_ - 1; }
    double front() const noexcept { return values_.front(); }
    double back() const noexcept { return values_.back(); }
    double range() const noexcept { return back() - front(); }

    /// Index k with values[k] <= t < values[k+1]; the last span is closed.
    int find_span(double t) const;

    /// Multiplicity of t, matching knots within kKnotSnapTol * range.
    int multiplicity(double t) const;

    /// Existing knot value within tolerance of t, or t itself.
    double snap(double t) const;

    /// Distinct interior knot values with their multiplicities.
    std::vector<std::pair<double, int>> interior_breaks() const;

    /// The p+1 nonzero basis values N_{span-p..span}(t).
    void basis_funs(int span, double t, std::span<double> out) const;

    /// Nonzero basis values and derivatives up to order n: ders[k][j].
    std::vector<std::vector<double>> ders_basis_funs(int span, double t, int n) const;

    /// Greville abscissae, one per basis function.
    std::vector<double> greville() const;

    bool contains(double t) const noexcept { return t >= front() && t <= back(); }

private:
    std::vector<double> values_;
    int degree_ = 0;
};

/// N_{i,p}(t) via the Cox-de Boor recurrence.
double basis_eval(const KnotVector& knots, int i, double t);

class NurbsCurve {
public:
    NurbsCurve() = default;
    /// Throws InputError when counts or weights are inconsistent.
    NurbsCurve(KnotVector knots, std::vector<Point2> control_points,
               std::vector<double> weights = {});

    int degree() const noexcept { return knots_.degree(); }
    const KnotVector& knots() const noexcept { return knots_; }
    const std::vector<Point2>& control_points() const noexcept { return ctrl_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    int size() const noexcept { return static_cast<int>(ctrl_.size()); }
    double t0() const noexcept { return knots_.front(); }
    double t1() const noexcept { return knots_.back(); }

    bool is_rational() const noexcept;
    Point2 front() const { return ctrl_.front(); }
    Point2 back() const { return ctrl_.back(); }

    /// Diagonal of the control polygon's bounding box.
    double bbox_diagonal() const;

    /// Reversed parameter direction over the same range.
    NurbsCurve reversed() const;

private:
    KnotVector knots_;
    std::vector<Point2> ctrl_;
    std::vector<double> weights_;
};

Point2 curve_eval(const NurbsCurve& curve, double t);

/// Exact rational derivative of order 1 or 2.
Vector2 curve_derivative(const NurbsCurve& curve, double t, int order);

/// Point plus first and second derivative in one pass.
struct CurveDerivs {
    Point2 point;
    Vector2 d1;
    Vector2 d2;
};
CurveDerivs curve_derivs(const NurbsCurve& curve, double t);

/// Inserts t `times` times; the resulting multiplicity must stay <= degree.
NurbsCurve knot_insert(const NurbsCurve& curve, double t, int times);

NurbsCurve degree_elevate(const NurbsCurve& curve, int target_degree);

/// Knots become s*knots + t; control data is untouched.
NurbsCurve affine_reparam(const NurbsCurve& curve, double s, double t);

/// Affine map of the knot range onto exactly [a,b].
NurbsCurve reparam_to_range(const NurbsCurve& curve, double a, double b);

std::pair<NurbsCurve, NurbsCurve> split_curve(const NurbsCurve& curve, double t);

/// Joins abutting segments; interior joins carry multiplicity p.
NurbsCurve merge_curves(std::span<const NurbsCurve> segments);

struct ClosestPointResult {
    double param = 0.0;
    double distance = 0.0;
    double residual = 0.0;  // |(C - P) . C'|
    int iterations = 0;
    bool converged = false;
    bool clamped = false;
};

/// Newton projection with clamping; falls back to sampling plus
/// golden-section search when Newton stagnates.
ClosestPointResult closest_point(const NurbsCurve& curve, const Point2& p, double guess,
                                 int max_iter = 50);

struct Polyline {
    std::vector<double> params;
    std::vector<Point2> points;
    bool degenerate = false;
};

/// Recursive bisection until every chord is within chord_tol of the curve.
Polyline sample_adaptive(const NurbsCurve& curve, double chord_tol);

class NurbsSurface {
public:
    NurbsSurface() = default;
    /// Control net stored with u fastest: index = i + j * count_u.
    NurbsSurface(KnotVector knots_u, KnotVector knots_v, std::vector<Point2> control_net,
                 std::vector<double> weights = {});

    int degree_u() const noexcept { return ku_.degree(); }
    int degree_v() const noexcept { return kv_.degree(); }
    const KnotVector& knots_u() const noexcept { return ku_; }
    const KnotVector& knots_v() const noexcept { return kv_; }
    int count_u() const noexcept { return ku_.count(); }
    int count_v() const noexcept { return kv_.count(); }
    const std::vector<Point2>& control_net() const noexcept { return net_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    const Point2& control(int i, int j) const { return net_[index(i, j)]; }
    double weight(int i, int j) const { return weights_[index(i, j)]; }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * count_u();
    }
    bool is_rational() const noexcept;

    /// Row j as a curve in u.
    NurbsCurve row(int j) const;
    /// Column i as a curve in v.
    NurbsCurve column(int i) const;

    NurbsCurve south() const { return row(0); }
    NurbsCurve north() const { return row(count_v() - 1); }
    NurbsCurve west() const { return column(0); }
    NurbsCurve east() const { return column(count_u() - 1); }

    /// Rebuilds from rows (each a curve in u over identical knots).
    static NurbsSurface from_rows(const std::vector<NurbsCurve>& rows, const KnotVector& knots_v);
    /// Rebuilds from columns (each a curve in v over identical knots).
    static NurbsSurface from_columns(const std::vector<NurbsCurve>& cols,
                                     const KnotVector& knots_u);

private:
    KnotVector ku_;
    KnotVector kv_;
    std::vector<Point2> net_;
    std::vector<double> weights_;
};

struct SurfaceDerivs {
    Point2 point;
    Vector2 du;
    Vector2 dv;
};

Point2 surface_eval(const NurbsSurface& s, double u, double v);
SurfaceDerivs surface_derivs(const NurbsSurface& s, double u, double v);

NurbsSurface surface_insert_knot_u(const NurbsSurface& s, double t, int times);
NurbsSurface surface_insert_knot_v(const NurbsSurface& s, double t, int times);
NurbsSurface surface_elevate_u(const NurbsSurface& s, int target_degree);
NurbsSurface surface_elevate_v(const NurbsSurface& s, int target_degree);

}  // namespace scmatch
