#include "scmatch/paramgen.hpp"

#include "scmatch/error.hpp"
#include "scmatch/quadrature.hpp"
#include "scmatch/quality.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace scmatch {

namespace {

using Hom = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;

Hom to_hom(const Point2& p, double w) { return {w * p.x(), w * p.y(), w}; }

bool same_knots(const KnotVector& a, const KnotVector& b) {
    if (a.degree() != b.degree() || a.size() != b.size()) return false;
    const double tol = kKnotSnapTol * std::max(1.0, a.range());
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a[k] - b[k]) > tol) return false;
    return true;
}

/// Greville abscissae mapped to [0, 1] with exact ends.
std::vector<double> unit_greville(const KnotVector& k) {
    auto g = k.greville();
    for (double& x : g) x = std::clamp((x - k.front()) / k.range(), 0.0, 1.0);
    g.front() = 0.0;
    g.back() = 1.0;
    return g;
}

/// Greville abscissae with exact end values.
std::vector<double> greville_exact(const KnotVector& k) {
    auto g = k.greville();
    g.front() = k.front();
    g.back() = k.back();
    return g;
}

std::vector<double> breakpoints(const KnotVector& k) {
    std::vector<double> b{k.front()};
    for (const auto& [t, m] : k.interior_breaks()) b.push_back(t);
    b.push_back(k.back());
    return b;
}

/// Rational basis functions and parametric gradients at one point, plus the
/// polynomial tensor-product basis that carries the parametric coordinate fields.
struct LocalBasis {
    std::vector<int> index;  // global control index, u fastest
    std::vector<double> R, Ru, Rv;
    std::vector<double> N, Nu, Nv;
    Point2 x;
    Mat2 J;  // [x_u x_v; y_u y_v]
};

LocalBasis local_basis(const NurbsSurface& s, double u, double v) {
    const auto& KU = s.knots_u();
    const auto& KV = s.knots_v();
    const int p = KU.degree(), q = KV.degree();
    const int su = KU.find_span(u), sv = KV.find_span(v);
    const auto Nu = KU.ders_basis_funs(su, u, std::min(1, p));
    const auto Nv = KV.ders_basis_funs(sv, v, std::min(1, q));
    const auto d1 = [](const std::vector<std::vector<double>>& N, int a) { return N.size() > 1 ? N[1][a] : 0.0; };
    LocalBasis b;
    const std::size_t m = static_cast<std::size_t>((p + 1) * (q + 1));
    b.index.reserve(m);
    b.R.reserve(m);
    b.Ru.reserve(m);
    b.Rv.reserve(m);
    double W = 0.0, Wu = 0.0, Wv = 0.0;
    for (int c = 0; c <= q; ++c) {
        for (int a = 0; a <= p; ++a) {
            const int i = su - p + a, j = sv - q + c;
            const double w = s.weight(i, j);
            b.index.push_back(static_cast<int>(s.index(i, j)));
            b.N.push_back(Nu[0][a] * Nv[0][c]);
            b.Nu.push_back(d1(Nu, a) * Nv[0][c]);
            b.Nv.push_back(Nu[0][a] * d1(Nv, c));
            b.R.push_back(b.N.back() * w);
            b.Ru.push_back(b.Nu.back() * w);
            b.Rv.push_back(b.Nv.back() * w);
            W += b.R.back();
            Wu += b.Ru.back();
            Wv += b.Rv.back();
        }
    }
    b.x.setZero();
    Vector2 xu = Vector2::Zero(), xv = Vector2::Zero();
    for (std::size_t k = 0; k < m; ++k) {
        b.R[k] /= W;
        b.Ru[k] = (b.Ru[k] - b.R[k] * Wu) / W;
        b.Rv[k] = (b.Rv[k] - b.R[k] * Wv) / W;
        const Point2& P = s.control_net()[static_cast<std::size_t>(b.index[k])];
        b.x += b.R[k] * P;
        xu += b.Ru[k] * P;
        xv += b.Rv[k] * P;
    }
    b.J.col(0) = xu;
    b.J.col(1) = xv;
    return b;
}

struct QuadPoint {
    double u, v, weight;  // weight includes the parametric element area
};

/// Tensor Gauss points over all nonempty elements, in fixed order.
std::vector<QuadPoint> quad_points(const NurbsSurface& s, int nu_pts, int nv_pts) {
    const auto gu = gauss_legendre(nu_pts);
    const auto gv = gauss_legendre(nv_pts);
    const auto bu = breakpoints(s.knots_u()), bv = breakpoints(s.knots_v());
    std::vector<QuadPoint> pts;
    pts.reserve((bu.size() - 1) * (bv.size() - 1) * gu.nodes.size() * gv.nodes.size());
    for (std::size_t ev = 0; ev + 1 < bv.size(); ++ev) {
        const double hv = 0.5 * (bv[ev + 1] - bv[ev]), mv = 0.5 * (bv[ev + 1] + bv[ev]);
        for (std::size_t eu = 0; eu + 1 < bu.size(); ++eu) {
            const double hu = 0.5 * (bu[eu + 1] - bu[eu]), mu = 0.5 * (bu[eu + 1] + bu[eu]);
            for (std::size_t b = 0; b < gv.nodes.size(); ++b)
                for (std::size_t a = 0; a < gu.nodes.size(); ++a)
                    pts.push_back({mu + hu * gu.nodes[a], mv + hv * gv.nodes[b], gu.weights[a] * gv.weights[b] * hu * hv});
        }
    }
    return pts;
}

bool is_boundary(const NurbsSurface& s, int global) {
    const int i = global % s.count_u(), j = global / s.count_u();
    return i == 0 || j == 0 || i == s.count_u() - 1 || j == s.count_v() - 1;
}

/// Maps global control indices to interior/boundary numbering.
struct DofMap {
    std::vector<int> local;  // index within its class
    std::vector<bool> boundary;
    int n_interior = 0;
    int n_boundary = 0;

    explicit DofMap(const NurbsSurface& s) {
        const int n = s.count_u() * s.count_v();
        local.resize(static_cast<std::size_t>(n));
        boundary.resize(static_cast<std::size_t>(n));
        for (int g = 0; g < n; ++g) {
            boundary[g] = is_boundary(s, g);
            local[g] = boundary[g] ? n_boundary++ : n_interior++;
        }
    }
};

struct SplitSystem {
    SpMat KII;
    SpMat KIB;
};

SplitSystem split_system(const std::vector<Eigen::Triplet<double>>& trip, const DofMap& dm) {
    std::vector<Eigen::Triplet<double>> tii, tib;
    for (const auto& t : trip) {
        if (dm.boundary[t.row()]) continue;
        const int r = dm.local[t.row()];
        if (dm.boundary[t.col()])
            tib.emplace_back(r, dm.local[t.col()], t.value());
        else
            tii.emplace_back(r, dm.local[t.col()], t.value());
    }
    SplitSystem out;
    out.KII.resize(dm.n_interior, dm.n_interior);
    out.KIB.resize(dm.n_interior, dm.n_boundary);
    out.KII.setFromTriplets(tii.begin(), tii.end());
    out.KIB.setFromTriplets(tib.begin(), tib.end());
    return out;
}

int quad_count(const EllipticOptions& opts, int degree) { return opts.quad_points > 0 ? opts.quad_points : degree + 1; }

struct Stiffness {
    std::vector<Eigen::Triplet<double>> triplets;
    double floor = 0.0;
    int floored = 0;
};

/// K_ab = int grad N_a^T J^{-1} J^{-T} grad N_b (1/|J| weighting folded in), with |J| floored.
/// The polynomial basis reproduces the linear coordinate fields exactly, also on rational geometry.
Stiffness assemble_elliptic(const NurbsSurface& s, const EllipticOptions& opts) {
    const auto pts = quad_points(s, quad_count(opts, s.degree_u()), quad_count(opts, s.degree_v()));
    std::vector<LocalBasis> bases;
    bases.reserve(pts.size());
    std::vector<double> dets;
    dets.reserve(pts.size());
    for (const auto& qp : pts) {
        bases.push_back(local_basis(s, qp.u, qp.v));
        dets.push_back(std::abs(bases.back().J.determinant()));
    }
    std::vector<double> sorted = dets;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    Stiffness K;
    K.floor = opts.jacobian_floor_rel * sorted[sorted.size() / 2];
    if (!(K.floor > 0.0)) K.floor = std::numeric_limits<double>::min();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto& b = bases[k];
        const Mat2& J = b.J;
        Mat2 adj;
        adj << J(1, 1), -J(0, 1), -J(1, 0), J(0, 0);
        double d = dets[k];
        if (!(d >= K.floor)) {
            ++K.floored;
            d = K.floor;
        }
        const Mat2 G = adj * adj.transpose() / (d * d) * pts[k].weight;
        const std::size_t m = b.index.size();
        for (std::size_t a = 0; a < m; ++a) {
            const Vector2 ga(b.Nu[a], b.Nv[a]);
            const Vector2 Gga = G * ga;
            for (std::size_t c = 0; c < m; ++c)
                K.triplets.emplace_back(b.index[a], b.index[c], Gga.dot(Vector2(b.Nu[c], b.Nv[c])));
        }
    }
    return K;
}

/// Coefficients of the coordinate functions u and v.
std::pair<Eigen::VectorXd, Eigen::VectorXd> param_fields(const NurbsSurface& s) {
    const auto gu = greville_exact(s.knots_u()), gv = greville_exact(s.knots_v());
    const int n = s.count_u() * s.count_v();
    Eigen::VectorXd xi(n), eta(n);
    for (int j = 0; j < s.count_v(); ++j)
        for (int i = 0; i < s.count_u(); ++i) {
            xi(s.index(i, j)) = gu[i];
            eta(s.index(i, j)) = gv[j];
        }
    return {xi, eta};
}

void split_vector(const Eigen::VectorXd& full, const DofMap& dm, Eigen::VectorXd& in, Eigen::VectorXd& bd) {
    in.resize(dm.n_interior);
    bd.resize(dm.n_boundary);
    for (Eigen::Index g = 0; g < full.size(); ++g) (dm.boundary[g] ? bd : in)(dm.local[g]) = full(g);
}

double residual_norm(const SplitSystem& sys, const Eigen::VectorXd& xi, const Eigen::VectorXd& eta, const DofMap& dm) {
    Eigen::VectorXd xi_i, xi_b, eta_i, eta_b;
    split_vector(xi, dm, xi_i, xi_b);
    split_vector(eta, dm, eta_i, eta_b);
    const Eigen::VectorXd rx = sys.KII * xi_i + sys.KIB * xi_b;
    const Eigen::VectorXd ry = sys.KII * eta_i + sys.KIB * eta_b;
    return std::sqrt(rx.squaredNorm() + ry.squaredNorm());
}

double net_diagonal(const NurbsSurface& s) {
    Eigen::AlignedBox2d box;
    for (const auto& p : s.control_net()) box.extend(p);
    return std::max(box.diagonal().norm(), 1e-300);
}

NurbsSurface refine_uniform(const NurbsSurface& s) {
    NurbsSurface out = s;
    const auto bu = breakpoints(s.knots_u());
    for (std::size_t k = 0; k + 1 < bu.size(); ++k) out = surface_insert_knot_u(out, 0.5 * (bu[k] + bu[k + 1]), 1);
    const auto bv = breakpoints(s.knots_v());
    for (std::size_t k = 0; k + 1 < bv.size(); ++k) out = surface_insert_knot_v(out, 0.5 * (bv[k] + bv[k + 1]), 1);
    return out;
}

/// Inserts `count` uniform knots a + (b - a) i / (count + 1) not already present.
NurbsCurve insert_uniform(const NurbsCurve& c, int count) {
    NurbsCurve out = c;
    for (int i = 1; i <= count; ++i) {
        const double t = c.t0() + (c.t1() - c.t0()) * i / (count + 1);
        if (out.knots().multiplicity(t) == 0) out = knot_insert(out, t, 1);
    }
    return out;
}

}  // namespace

void validate(const EllipticOptions& o) {
    if (o.target_degree_xi < 0 || o.target_degree_eta < 0 || o.extra_knots_xi < 0 || o.extra_knots_eta < 0)
        throw InputError("EllipticOptions: degrees and knot counts must be nonnegative");
    if (o.max_picard_iters < 1) throw InputError("EllipticOptions: max_picard_iters must be positive");
    if (!(o.update_tol > 0.0) || !(o.jacobian_floor_rel > 0.0))
        throw InputError("EllipticOptions: tolerances must be positive");
    if (o.quad_points < 0) throw InputError("EllipticOptions: quad_points must be nonnegative");
}

// ------------------------------------------------------------- compatibility

std::pair<NurbsCurve, NurbsCurve> make_compatible(const NurbsCurve& a_in, const NurbsCurve& b_in) {
    NurbsCurve a = a_in;
    NurbsCurve b = reparam_to_range(b_in, a.t0(), a.t1());
    const int p = std::max(a.degree(), b.degree());
    if (a.degree() < p) a = degree_elevate(a, p);
    if (b.degree() < p) b = degree_elevate(b, p);
    for (const auto& [t, m] : b.knots().interior_breaks()) {
        const int have = a.knots().multiplicity(t);
        if (m > have) a = knot_insert(a, t, m - have);
    }
    for (const auto& [t, m] : a.knots().interior_breaks()) {
        const int have = b.knots().multiplicity(t);
        if (m > have) b = knot_insert(b, t, m - have);
    }
    if (!same_knots(a.knots(), b.knots()))
        throw NumericalError("make_compatible: knot vectors differ after merging");
    b = NurbsCurve(a.knots(), b.control_points(), b.weights());
    return {a, b};
}

// ------------------------------------------------------------------- Coons

NurbsSurface coons_patch(const Brep& brep, std::vector<std::string>* warnings) {
    const NurbsCurve& S = brep.south;
    const NurbsCurve& N = brep.north;
    const NurbsCurve& W = brep.west;
    const NurbsCurve& E = brep.east;
    if (!same_knots(S.knots(), N.knots()))
        throw InputError("coons_patch: South and North are not compatible (degree or knots differ)");
    if (!same_knots(W.knots(), E.knots()))
        throw InputError("coons_patch: West and East are not compatible (degree or knots differ)");
    const double ctol = 1e-8 * std::max(1.0, brep.diameter());
    if ((W.front() - S.front()).norm() > ctol || (S.back() - E.front()).norm() > ctol ||
        (E.back() - N.back()).norm() > ctol || (N.front() - W.back()).norm() > ctol)
        throw InputError("coons_patch: corner mismatch");

    const KnotVector& KU = S.knots();
    const KnotVector& KV = W.knots();
    const int nu = S.size(), nv = W.size();
    const auto gu = unit_greville(KU), gv = unit_greville(KV);

    // Per-curve weight scales making corner weights agree.
    const auto& ws = S.weights();
    const auto& wn = N.weights();
    const auto& ww = W.weights();
    const auto& we = E.weights();
    const double cS = 1.0;
    const double cW = ws.front() / ww.front();
    const double cE = ws.back() / we.front();
    const double cN = cE * we.back() / wn.back();
    const bool rational = S.is_rational() || N.is_rational() || W.is_rational() || E.is_rational();
    bool consistent = std::abs(cN * wn.front() - cW * ww.back()) <= 1e-12 * cW * ww.back();

    std::vector<Point2> net(static_cast<std::size_t>(nu * nv));
    std::vector<double> wts(static_cast<std::size_t>(nu * nv), 1.0);
    const auto blend = [&](bool homogeneous) {
        const auto H = [&](const NurbsCurve& c, int k, double scale) {
            return homogeneous ? to_hom(c.control_points()[k], scale * c.weights()[k])
                               : Hom(c.control_points()[k].x(), c.control_points()[k].y(), 1.0);
        };
        const Hom s0 = H(S, 0, cS), s1 = H(S, nu - 1, cS), n0 = H(N, 0, cN), n1 = H(N, nu - 1, cN);
        bool ok = true;
        for (int j = 0; j < nv; ++j) {
            const double v = gv[j];
            for (int i = 0; i < nu; ++i) {
                const double u = gu[i];
                Hom h = (1.0 - v) * H(S, i, cS) + v * H(N, i, cN) + (1.0 - u) * H(W, j, cW) + u * H(E, j, cE) -
                        ((1.0 - u) * (1.0 - v) * s0 + u * (1.0 - v) * s1 + (1.0 - u) * v * n0 + u * v * n1);
                if (!(h.z() > 0.0)) {
                    ok = false;
                    h.z() = 1.0;
                }
                net[i + j * nu] = h.head<2>() / h.z();
                wts[i + j * nu] = h.z();
            }
        }
        return ok;
    };
    bool homogeneous = rational && consistent;
    if (homogeneous && !blend(true)) {
        homogeneous = false;
        consistent = false;
    }
    if (!homogeneous) blend(false);

    // Boundary rows and columns carry the input control data exactly.
    for (int i = 0; i < nu; ++i) {
        net[i] = S.control_points()[i];
        net[i + (nv - 1) * nu] = N.control_points()[i];
        wts[i] = homogeneous ? cS * ws[i] : 1.0;
        wts[i + (nv - 1) * nu] = homogeneous ? cN * wn[i] : 1.0;
    }
    for (int j = 0; j < nv; ++j) {
        net[j * nu] = W.control_points()[j];
        net[nu - 1 + j * nu] = E.control_points()[j];
        wts[j * nu] = homogeneous ? cW * ww[j] : 1.0;
        wts[nu - 1 + j * nu] = homogeneous ? cE * we[j] : 1.0;
    }
    if (rational && !homogeneous) {
        // Report how far the polynomial fallback moves each boundary.
        double dev = 0.0;
        for (const NurbsCurve* c : {&S, &N, &W, &E}) {
            const NurbsCurve poly(c->knots(), c->control_points());
            for (int k = 0; k <= 200; ++k) {
                const double t = c->t0() + (c->t1() - c->t0()) * k / 200.0;
                dev = std::max(dev, (curve_eval(*c, t) - curve_eval(poly, t)).norm());
            }
        }
        if (warnings) {
            std::ostringstream msg;
            msg << "coons_patch: incompatible boundary weights, using unit weights (boundary deviation <= "
                << std::setprecision(6) << dev << ")";
            warnings->push_back(msg.str());
        }
    }
    return {KU, KV, std::move(net), std::move(wts)};
}

NurbsSurface linear_only_pipeline(const Brep& brep, std::vector<std::string>* warnings) {
    Brep b = brep;
    std::tie(b.west, b.east) = make_compatible(brep.west, brep.east);
    std::tie(b.south, b.north) = make_compatible(brep.south, brep.north);
    return coons_patch(b, warnings);
}

// -------------------------------------------------------------- k-refinement

NurbsSurface k_refine(const NurbsSurface& s, const EllipticOptions& opts) {
    validate(opts);
    NurbsSurface out = s;
    if (opts.target_degree_xi > out.degree_u()) out = surface_elevate_u(out, opts.target_degree_xi);
    if (opts.target_degree_eta > out.degree_v()) out = surface_elevate_v(out, opts.target_degree_eta);
    if (opts.extra_knots_xi > 0) {
        std::vector<NurbsCurve> rows;
        for (int j = 0; j < out.count_v(); ++j) rows.push_back(insert_uniform(out.row(j), opts.extra_knots_xi));
        out = NurbsSurface::from_rows(rows, out.knots_v());
    }
    if (opts.extra_knots_eta > 0) {
        std::vector<NurbsCurve> cols;
        for (int i = 0; i < out.count_u(); ++i) cols.push_back(insert_uniform(out.column(i), opts.extra_knots_eta));
        out = NurbsSurface::from_columns(cols, out.knots_u());
    }
    return out;
}

// ---------------------------------------------------------------- elliptic

std::vector<std::vector<double>> elliptic_stiffness_dense(const NurbsSurface& s, const EllipticOptions& opts) {
    const auto K = assemble_elliptic(s, opts);
    const int n = s.count_u() * s.count_v();
    SpMat M(n, n);
    M.setFromTriplets(K.triplets.begin(), K.triplets.end());
    const Eigen::MatrixXd D(M);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[i][j] = D(i, j);
    return out;
}

double elliptic_residual(const NurbsSurface& s, const EllipticOptions& opts) {
    const DofMap dm(s);
    const auto sys = split_system(assemble_elliptic(s, opts).triplets, dm);
    const auto [xi, eta] = param_fields(s);
    return residual_norm(sys, xi, eta, dm);
}

EllipticResult elliptic_improve(const NurbsSurface& s, const EllipticOptions& opts) {
    validate(opts);
    const DofMap dm(s);
    const auto [xi, eta] = param_fields(s);
    Eigen::VectorXd xi_i, xi_b, eta_i, eta_b;
    split_vector(xi, dm, xi_i, xi_b);
    split_vector(eta, dm, eta_i, eta_b);
    const double diag = net_diagonal(s);
    const auto& KU = s.knots_u();
    const auto& KV = s.knots_v();

    EllipticResult res;
    res.surface = s;
    if (dm.n_interior == 0) {
        res.converged = true;
        return res;
    }
    const auto assemble = [&](const NurbsSurface& g, Stiffness& K) {
        K = assemble_elliptic(g, opts);
        return split_system(K.triplets, dm);
    };
    Stiffness K;
    SplitSystem sys = assemble(res.surface, K);
    if (K.floored > 0) res.warnings.push_back("elliptic_improve: initial guess has degenerate or folded points");
    res.floored_points += K.floored;
    double r = residual_norm(sys, xi, eta, dm);
    res.initial_residual = r;
    res.residual_history.push_back(r);

    // Least-squares samples: Gauss points, one more than the degree per direction.
    const auto samples = quad_points(s, s.degree_u() + 2, s.degree_v() + 2);

    for (int it = 0; it < opts.max_picard_iters; ++it) {
        // Quasi-harmonic parametric fields on the current geometry.
        Eigen::SimplicialLDLT<SpMat> chol(sys.KII);
        if (chol.info() != Eigen::Success)
            throw NumericalError("elliptic_improve: singular stiffness matrix", r);
        const Eigen::VectorXd new_xi = chol.solve(-(sys.KIB * xi_b));
        const Eigen::VectorXd new_eta = chol.solve(-(sys.KIB * eta_b));

        // The point x(p) should carry parameter Phi(p); refit x o Phi^{-1}.
        Eigen::VectorXd phi_u(xi.size()), phi_v(eta.size());
        const auto build = [&](double lambda, NurbsSurface& out) {
            for (Eigen::Index g = 0; g < xi.size(); ++g) {
                if (dm.boundary[g]) {
                    phi_u(g) = xi(g);
                    phi_v(g) = eta(g);
                } else {
                    phi_u(g) = xi(g) + lambda * (new_xi(dm.local[g]) - xi(g));
                    phi_v(g) = eta(g) + lambda * (new_eta(dm.local[g]) - eta(g));
                }
            }
            std::vector<Eigen::Triplet<double>> ti, tb;
            Eigen::MatrixXd target(static_cast<Eigen::Index>(samples.size()), 2);
            for (std::size_t k = 0; k < samples.size(); ++k) {
                const auto b0 = local_basis(res.surface, samples[k].u, samples[k].v);
                double pu = 0.0, pv = 0.0;
                for (std::size_t a = 0; a < b0.index.size(); ++a) {
                    pu += b0.N[a] * phi_u(b0.index[a]);
                    pv += b0.N[a] * phi_v(b0.index[a]);
                }
                pu = std::clamp(pu, KU.front(), KU.back());
                pv = std::clamp(pv, KV.front(), KV.back());
                const auto b1 = local_basis(res.surface, pu, pv);
                Point2 t = b0.x;
                for (std::size_t a = 0; a < b1.index.size(); ++a) {
                    const int g = b1.index[a];
                    if (dm.boundary[g])
                        t -= b1.R[a] * res.surface.control_net()[static_cast<std::size_t>(g)];
                    else
                        ti.emplace_back(static_cast<int>(k), dm.local[g], b1.R[a]);
                }
                target.row(static_cast<Eigen::Index>(k)) = t.transpose();
            }
            SpMat A(static_cast<Eigen::Index>(samples.size()), dm.n_interior);
            A.setFromTriplets(ti.begin(), ti.end());
            const SpMat AtA = A.transpose() * A;
            Eigen::SimplicialLDLT<SpMat> ls(AtA);
            if (ls.info() != Eigen::Success) return false;
            const Eigen::MatrixXd sol = ls.solve(A.transpose() * target);
            if (ls.info() != Eigen::Success || !sol.allFinite()) return false;
            std::vector<Point2> net = res.surface.control_net();
            for (std::size_t g = 0; g < net.size(); ++g)
                if (!dm.boundary[g]) net[g] = sol.row(dm.local[g]).transpose();
            out = NurbsSurface(res.surface.knots_u(), res.surface.knots_v(), std::move(net), res.surface.weights());
            return true;
        };

        double lambda = 1.0;
        bool accepted = false;
        NurbsSurface trial;
        Stiffness Kt;
        SplitSystem sys_t;
        double rt = 0.0;
        const auto displacement = [&](const NurbsSurface& g) {
            double d = 0.0;
            for (std::size_t k = 0; k < g.control_net().size(); ++k)
                d = std::max(d, (g.control_net()[k] - res.surface.control_net()[k]).norm());
            return d;
        };
        bool negligible = false;
        for (int h = 0; h < 6; ++h, lambda *= 0.5) {
            if (h > 0) ++res.damping_steps;
            if (!build(lambda, trial)) continue;
            sys_t = assemble(trial, Kt);
            rt = residual_norm(sys_t, xi, eta, dm);
            if (rt < r) {
                accepted = true;
                break;
            }
            // A full step this small means the current geometry is already the fixed point.
            if (h == 0 && displacement(trial) / diag <= opts.update_tol) {
                negligible = true;
                break;
            }
        }
        if (negligible) {
            res.iterations = it + 1;
            res.converged = true;
            break;
        }
        if (!accepted) {
            res.warnings.push_back("elliptic_improve: update did not reduce the residual; stopping");
            break;
        }
        const double disp = displacement(trial);
        res.surface = std::move(trial);
        sys = std::move(sys_t);
        res.floored_points += Kt.floored;
        r = rt;
        res.residual_history.push_back(r);
        res.iterations = it + 1;
        if (disp / diag <= opts.update_tol) {
            res.converged = true;
            break;
        }
    }
    res.final_residual = r;
    return res;
}

// ------------------------------------------------------------------ Poisson

PoissonProblem PoissonProblem::sine() {
    constexpr double tp = 2.0 * std::numbers::pi;
    PoissonProblem p;
    p.exact = [](double x, double y) { return std::sin(tp * x) * std::sin(tp * y); };
    p.gradient = [](double x, double y) {
        return Vector2(tp * std::cos(tp * x) * std::sin(tp * y), tp * std::sin(tp * x) * std::cos(tp * y));
    };
    p.source = [](double x, double y) { return 2.0 * tp * tp * std::sin(tp * x) * std::sin(tp * y); };
    return p;
}

PoissonProblem PoissonProblem::zero() {
    PoissonProblem p;
    p.exact = [](double, double) { return 0.0; };
    p.gradient = [](double, double) { return Vector2(0.0, 0.0); };
    p.source = [](double, double) { return 0.0; };
    return p;
}

std::vector<double> poisson_solve(const NurbsSurface& s, const PoissonProblem& problem) {
    const int nu = s.count_u(), nv = s.count_v();
    const DofMap dm(s);
    const auto pts = quad_points(s, s.degree_u() + 1, s.degree_v() + 1);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd F = Eigen::VectorXd::Zero(nu * nv);
    for (const auto& qp : pts) {
        const auto b = local_basis(s, qp.u, qp.v);
        const double det = b.J.determinant();
        if (!(det > 0.0)) throw NumericalError("poisson_solve: nonpositive Jacobian at a quadrature point");
        Mat2 adj;
        adj << b.J(1, 1), -b.J(0, 1), -b.J(1, 0), b.J(0, 0);
        const Mat2 G = adj * adj.transpose() / det * qp.weight;
        const double f = problem.source(b.x.x(), b.x.y()) * det * qp.weight;
        for (std::size_t a = 0; a < b.index.size(); ++a) {
            const Vector2 Gga = G * Vector2(b.Ru[a], b.Rv[a]);
            F(b.index[a]) += f * b.R[a];
            for (std::size_t c = 0; c < b.index.size(); ++c)
                trip.emplace_back(b.index[a], b.index[c], Gga.dot(Vector2(b.Ru[c], b.Rv[c])));
        }
    }
    const auto sys = split_system(trip, dm);

    // Boundary coefficients by collocation at the Greville points of each side.
    Eigen::VectorXd full = Eigen::VectorXd::Zero(nu * nv);
    const auto gu = greville_exact(s.knots_u()), gv = greville_exact(s.knots_v());
    const auto collocate = [&](bool along_u, double fixed, int line) {
        const int n = along_u ? nu : nv;
        const auto& g = along_u ? gu : gv;
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs(n);
        for (int k = 0; k < n; ++k) {
            const auto b = along_u ? local_basis(s, g[k], fixed) : local_basis(s, fixed, g[k]);
            for (std::size_t a = 0; a < b.index.size(); ++a) {
                const int i = b.index[a] % nu, j = b.index[a] / nu;
                if (along_u && j == line) B(k, i) += b.R[a];
                if (!along_u && i == line) B(k, j) += b.R[a];
            }
            rhs(k) = problem.exact(b.x.x(), b.x.y());
        }
        const Eigen::VectorXd c = B.partialPivLu().solve(rhs);
        for (int k = 0; k < n; ++k) full(along_u ? s.index(k, line) : s.index(line, k)) = c(k);
    };
    collocate(true, s.knots_v().front(), 0);
    collocate(true, s.knots_v().back(), nv - 1);
    collocate(false, s.knots_u().front(), 0);
    collocate(false, s.knots_u().back(), nu - 1);

    Eigen::VectorXd in, bd, f_in, f_bd;
    split_vector(full, dm, in, bd);
    split_vector(F, dm, f_in, f_bd);
    if (dm.n_interior > 0) {
        Eigen::SimplicialLDLT<SpMat> chol(sys.KII);
        if (chol.info() != Eigen::Success) throw NumericalError("poisson_solve: singular stiffness matrix");
        in = chol.solve(f_in - sys.KIB * bd);
    }
    std::vector<double> out(static_cast<std::size_t>(nu * nv));
    for (int g = 0; g < nu * nv; ++g) out[g] = dm.boundary[g] ? bd(dm.local[g]) : in(dm.local[g]);
    return out;
}

std::vector<ConvergenceRow> poisson_demo(const NurbsSurface& s, const PoissonOptions& opts) {
    if (opts.levels < 1) throw InputError("poisson_demo: need at least one level");
    if (opts.degree < 1) throw InputError("poisson_demo: degree must be at least 1");
    if (opts.initial_refinements < 0) throw InputError("poisson_demo: negative initial refinement count");
    const auto q = quality_report(s, 101, 101);
    if (q.fold) {
        std::ostringstream msg;
        msg << "poisson_demo: surface folds (min |J|_s = " << q.min_sj << ")";
        throw NumericalError(msg.str(), q.min_sj);
    }
    NurbsSurface cur = s;
    if (cur.degree_u() < opts.degree) cur = surface_elevate_u(cur, opts.degree);
    if (cur.degree_v() < opts.degree) cur = surface_elevate_v(cur, opts.degree);
    for (int k = 0; k < opts.initial_refinements; ++k) cur = refine_uniform(cur);

    std::vector<ConvergenceRow> rows;
    for (int level = 0; level < opts.levels; ++level) {
        if (level > 0) cur = refine_uniform(cur);
        const auto coef = poisson_solve(cur, opts.problem);
        const auto pts = quad_points(cur, cur.degree_u() + 1, cur.degree_v() + 1);
        double l2 = 0.0, h1 = 0.0;
        for (const auto& qp : pts) {
            const auto b = local_basis(cur, qp.u, qp.v);
            const double det = b.J.determinant();
            double uh = 0.0;
            Vector2 gref = Vector2::Zero();
            for (std::size_t a = 0; a < b.index.size(); ++a) {
                uh += b.R[a] * coef[b.index[a]];
                gref += Vector2(b.Ru[a], b.Rv[a]) * coef[b.index[a]];
            }
            const Vector2 gphys = b.J.transpose().inverse() * gref;
            const double e = uh - opts.problem.exact(b.x.x(), b.x.y());
            const Vector2 ge = gphys - opts.problem.gradient(b.x.x(), b.x.y());
            l2 += e * e * det * qp.weight;
            h1 += ge.squaredNorm() * det * qp.weight;
        }
        const auto bu = breakpoints(cur.knots_u()), bv = breakpoints(cur.knots_v());
        double h = 0.0;
        for (std::size_t k = 0; k + 1 < bu.size(); ++k) h = std::max(h, (bu[k + 1] - bu[k]) / cur.knots_u().range());
        for (std::size_t k = 0; k + 1 < bv.size(); ++k) h = std::max(h, (bv[k + 1] - bv[k]) / cur.knots_v().range());
        ConvergenceRow row;
        row.level = level;
        row.h = h;
        row.dofs = DofMap(cur).n_interior;
        row.l2_error = std::sqrt(l2);
        row.h1_error = std::sqrt(h1);
        rows.push_back(row);
    }
    return rows;
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
    std::ostringstream os;
    os << "level,h,dofs,l2_error,h1_error\n" << std::setprecision(17);
    for (const auto& r : rows) os << r.level << ',' << r.h << ',' << r.dofs << ',' << r.l2_error << ',' << r.h1_error << '\n';
    return os.str();
}

}  // namespace scmatch
