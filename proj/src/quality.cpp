#include "scmatch/quality.hpp"

#include "scmatch/error.hpp"
#include "scmatch/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace scmatch {

namespace {

constexpr double kTangentEps = 1e-14;

double cross2(const Vector2& a, const Vector2& b) { return a.x() * b.y() - a.y() * b.x(); }

double grid_coord(const KnotVector& k, int i, int n) {
    if (i == n - 1) return k.back();
    return k.front() + k.range() * static_cast<double>(i) / (n - 1);
}

/// Gauss points per span: exact for polynomial |J|, oversampled for rational maps.
int area_points(const NurbsSurface& s, int degree) { return s.is_rational() ? 4 * (degree + 1) : degree + 1; }

}  // namespace

double jacobian_det(const NurbsSurface& s, double u, double v) {
    const auto d = surface_derivs(s, u, v);
    return cross2(d.du, d.dv);
}

ScaledJacobian scaled_jacobian(const NurbsSurface& s, double u, double v) {
    const auto d = surface_derivs(s, u, v);
    const double nu = d.du.norm(), nv = d.dv.norm();
    if (nu < kTangentEps || nv < kTangentEps) return {0.0, true};
    const double sj = cross2(d.du, d.dv) / (nu * nv);
    return {std::clamp(sj, -1.0, 1.0), false};
}

double uniformity(const NurbsSurface& s, double u, double v, double r_area) {
    if (!(r_area > 0.0)) throw InputError("uniformity: area ratio must be positive");
    return std::abs(jacobian_det(s, u, v) / r_area - 1.0);
}

double area_ratio(const NurbsSurface& s) {
    const auto& KU = s.knots_u();
    const auto& KV = s.knots_v();
    const auto gu = gauss_legendre(area_points(s, KU.degree()));
    const auto gv = gauss_legendre(area_points(s, KV.degree()));
    const auto spans = [](const KnotVector& k) {
        std::vector<double> b{k.front()};
        for (const auto& [t, m] : k.interior_breaks()) b.push_back(t);
        b.push_back(k.back());
        return b;
    };
    const auto bu = spans(KU), bv = spans(KV);
    // Dividing by the quadrature's own measure keeps constant fields exact.
    double area = 0.0, measure = 0.0;
    for (std::size_t jv = 0; jv + 1 < bv.size(); ++jv) {
        const double hv = 0.5 * (bv[jv + 1] - bv[jv]), mv = 0.5 * (bv[jv + 1] + bv[jv]);
        for (std::size_t iu = 0; iu + 1 < bu.size(); ++iu) {
            const double hu = 0.5 * (bu[iu + 1] - bu[iu]), mu = 0.5 * (bu[iu + 1] + bu[iu]);
            for (std::size_t b = 0; b < gv.nodes.size(); ++b)
                for (std::size_t a = 0; a < gu.nodes.size(); ++a) {
                    const double w = gu.weights[a] * gv.weights[b] * hu * hv;
                    area += w * std::abs(jacobian_det(s, mu + hu * gu.nodes[a], mv + hv * gv.nodes[b]));
                    measure += w;
                }
        }
    }
    return area / measure;
}

QualityReport quality_report(const NurbsSurface& s, int n_u, int n_v) {
    if (n_u < 2 || n_v < 2) throw InputError("quality_report: grid needs at least 2 points per direction");
    QualityReport r;
    r.n_u = n_u;
    r.n_v = n_v;
    r.r_area = area_ratio(s);
    const auto total = static_cast<double>(n_u) * n_v;
    double min_sj = std::numeric_limits<double>::infinity(), sum_sj = 0.0;
    double max_un = 0.0, sum_un = 0.0;
    for (int j = 0; j < n_v; ++j) {
        const double v = grid_coord(s.knots_v(), j, n_v);
        for (int i = 0; i < n_u; ++i) {
            const double u = grid_coord(s.knots_u(), i, n_u);
            const auto d = surface_derivs(s, u, v);
            const double det = cross2(d.du, d.dv);
            const double nu = d.du.norm(), nv = d.dv.norm();
            double sj = 0.0;
            if (nu < kTangentEps || nv < kTangentEps)
                ++r.degenerate_points;
            else
                sj = std::clamp(det / (nu * nv), -1.0, 1.0);
            min_sj = std::min(min_sj, sj);
            sum_sj += sj;
            const double un = r.r_area > 0.0 ? std::abs(det / r.r_area - 1.0) : 0.0;
            max_un = std::max(max_un, un);
            sum_un += un;
        }
    }
    r.min_sj = min_sj;
    r.avg_sj = sum_sj / total;
    r.fold = !(min_sj > 0.0);
    if (!r.fold) {
        r.max_unif = max_un;
        r.avg_unif = sum_un / total;
    }
    return r;
}

std::string quality_csv_header() { return "geometry,method,grid,min_sj,avg_sj,max_unif,avg_unif,fold"; }

std::string quality_csv_row(const std::string& geometry, const std::string& method, const QualityReport& r) {
    std::ostringstream os;
    const auto num = [&](double x) {
        std::ostringstream t;
        t << std::setprecision(10) << x;
        std::string s = t.str();
        if (s.find_first_of(".e") == std::string::npos && s.find("inf") == std::string::npos &&
            s.find("nan") == std::string::npos)
            s += ".0";
        return s;
    };
    os << geometry << ',' << method << ',' << r.n_u << 'x' << r.n_v << ',' << num(r.min_sj) << ','
       << num(r.avg_sj) << ',';
    if (r.max_unif) os << num(*r.max_unif);
    os << ',';
    if (r.avg_unif) os << num(*r.avg_unif);
    os << ',' << (r.fold ? "true" : "false");
    return os.str();
}

}  // namespace scmatch
