#include "helpers.hpp"

#include "scmatch/error.hpp"
#include "scmatch/io.hpp"
#include "scmatch/matching.hpp"
#include "scmatch/paramgen.hpp"
#include "scmatch/quality.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace scmatch;
using testutil::bilinear;
using testutil::line;
using testutil::quarter_circle;

namespace {

double max_gap(const NurbsCurve& a, const NurbsCurve& b, int n = 200) {
    double d = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double f = static_cast<double>(k) / n;
        d = std::max(d, (curve_eval(a, a.t0() + f * (a.t1() - a.t0())) - curve_eval(b, b.t0() + f * (b.t1() - b.t0())))
                            .norm());
    }
    return d;
}

double max_surface_gap(const NurbsSurface& a, const NurbsSurface& b, int n = 14) {
    double d = 0.0;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const double fu = static_cast<double>(i) / n, fv = static_cast<double>(j) / n;
            const Point2 pa = surface_eval(a, a.knots_u().front() + fu * a.knots_u().range(),
                                           a.knots_v().front() + fv * a.knots_v().range());
            const Point2 pb = surface_eval(b, b.knots_u().front() + fu * b.knots_u().range(),
                                           b.knots_v().front() + fv * b.knots_v().range());
            d = std::max(d, (pa - pb).norm());
        }
    return d;
}

std::vector<double> greville(const KnotVector& kv) {
    std::vector<double> g(static_cast<std::size_t>(kv.count()));
    for (int i = 0; i < kv.count(); ++i) {
        double s = 0.0;
        for (int k = 1; k <= kv.degree(); ++k) s += kv[static_cast<std::size_t>(i + k)];
        g[i] = s / kv.degree();
    }
    return g;
}

bool interior(const NurbsSurface& s, int i, int j) {
    return i > 0 && j > 0 && i + 1 < s.count_u() && j + 1 < s.count_v();
}

NurbsSurface unit_square() { return bilinear({0, 0}, {1, 0}, {0, 1}, {1, 1}); }

double rate(double e0, double e1, double h0, double h1) { return std::log(e0 / e1) / std::log(h0 / h1); }

}  // namespace

TEST_SUITE("paramgen") {

TEST_CASE("make_compatible") {
    const auto arc = quarter_circle();
    const auto [x, y] = make_compatible(arc, arc);
    CHECK(x.knots().values() == arc.knots().values());
    CHECK(y.control_points() == arc.control_points());

    const NurbsCurve seg = line({0, 0}, {2, 1});
    const auto [a, b] = make_compatible(seg, arc);
    CHECK(a.degree() == 2);
    CHECK(b.degree() == 2);
    CHECK(a.knots().values() == b.knots().values());
    CHECK(max_gap(a, seg) <= 1e-12);
    CHECK(max_gap(b, arc) <= 1e-12);

    const NurbsCurve p(KnotVector::clamped(2, 0.0, 1.0, {0.3}), {{0, 0}, {1, 1}, {2, 0}, {3, 1}});
    const NurbsCurve q(KnotVector::clamped(2, 0.0, 1.0, {0.7}), {{0, 2}, {1, 3}, {2, 2}, {3, 3}});
    const auto [pp, qq] = make_compatible(p, q);
    for (const auto* c : {&pp, &qq}) {
        const auto& v = c->knots().values();
        CHECK(std::count(v.begin(), v.end(), 0.3) == 1);
        CHECK(std::count(v.begin(), v.end(), 0.7) == 1);
    }
    CHECK(max_gap(pp, p) <= 1e-12);
    CHECK(max_gap(qq, q) <= 1e-12);
}

TEST_CASE("coons patch examples") {
    const NurbsSurface sq = linear_only_pipeline(corpus_square());
    for (int j = 0; j <= 10; ++j)
        for (int i = 0; i <= 10; ++i) {
            const double u = i / 10.0, v = j / 10.0;
            CHECK((surface_eval(sq, u, v) - Point2(u, v)).norm() <= 1e-15);
            CHECK(scaled_jacobian(sq, u, v).value == doctest::Approx(1.0).epsilon(1e-15));
        }

    const NurbsSurface rect = linear_only_pipeline(corpus_rectangle(5.0, false));
    const double r = area_ratio(rect);
    CHECK(r == doctest::Approx(5.0).epsilon(1e-12));
    for (int j = 0; j <= 10; ++j)
        for (int i = 0; i <= 10; ++i) CHECK(uniformity(rect, i / 10.0, j / 10.0, r) <= 1e-12);

    const Brep ann = corpus_annulus();
    const NurbsSurface s = coons_patch(ann);
    CHECK(s.south().control_points() == ann.south.control_points());
    CHECK(s.north().control_points() == ann.north.control_points());
    CHECK(s.west().control_points() == ann.west.control_points());
    CHECK(s.east().control_points() == ann.east.control_points());
    CHECK(s.west().weights() == ann.west.weights());
    CHECK(s.east().weights() == ann.east.weights());
}

TEST_CASE("coons rejects incompatible sides and open corners") {
    Brep b = corpus_annulus();
    b.west = degree_elevate(b.west, 3);
    CHECK_THROWS_AS(coons_patch(b), InputError);
    Brep open = corpus_square();
    open.east = line({1, 0}, {1.1, 1});
    CHECK_THROWS_AS(linear_only_pipeline(open), InputError);
}

TEST_CASE("k_refine") {
    // Ruled in u: degree 1, no interior knots.
    const NurbsSurface ruled = bilinear({0, 0}, {3, 0.5}, {-0.5, 2}, {2, 3});
    EllipticOptions o;
    o.target_degree_eta = 1;
    const NurbsSurface r = k_refine(ruled, o);
    CHECK(r.degree_u() == 2);
    const std::vector<double> H{0, 0, 0, 1.0 / 3, 2.0 / 3, 1, 1, 1};
    REQUIRE(r.knots_u().size() == H.size());
    for (std::size_t k = 0; k < H.size(); ++k) CHECK(r.knots_u()[k] == doctest::Approx(H[k]).epsilon(1e-15));
    CHECK(max_surface_gap(r, ruled) <= 1e-12);

    // Targets already met: nothing to do.
    EllipticOptions none;
    none.extra_knots_xi = 0;
    const NurbsSurface again = k_refine(r, none);
    CHECK(max_surface_gap(again, r) <= 1e-13);
    CHECK(again.knots_u().values() == r.knots_u().values());

    // A rational, curved surface keeps its geometry.
    const NurbsSurface ann = linear_only_pipeline(corpus_annulus());
    EllipticOptions more;
    more.extra_knots_eta = 3;
    more.target_degree_xi = 3;
    const NurbsSurface k = k_refine(ann, more);
    CHECK(max_surface_gap(k, ann) <= 1e-12);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int n = 0; n < 200; ++n) {
        const double u = U(rng), v = U(rng);
        worst = std::max(worst, (surface_eval(k, u, v) - surface_eval(ann, u, v)).norm());
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("stiffness is symmetric and interior positive definite") {
    const NurbsSurface s = k_refine(linear_only_pipeline(match_boundaries(corpus_annulus()).brep));
    const auto K = elliptic_stiffness_dense(s);
    const int n = static_cast<int>(K.size());
    double scale = 0.0, asym = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            scale = std::max(scale, std::abs(K[a][b]));
            asym = std::max(asym, std::abs(K[a][b] - K[b][a]));
        }
    CHECK(asym <= 1e-12 * scale);

    std::vector<int> idx;
    for (int j = 0; j < s.count_v(); ++j)
        for (int i = 0; i < s.count_u(); ++i)
            if (interior(s, i, j)) idx.push_back(static_cast<int>(s.index(i, j)));
    REQUIRE(!idx.empty());
    Eigen::MatrixXd KI(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) KI(a, b) = K[idx[a]][idx[b]];
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(KI);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("linear fields are discretely harmonic") {
    EllipticOptions o;
    o.extra_knots_eta = 2;
    const NurbsSurface s = k_refine(unit_square(), o);
    const auto K = elliptic_stiffness_dense(s);
    const auto gu = greville(s.knots_u()), gv = greville(s.knots_v());
    for (const auto& [a, b, c] : {std::tuple{0.3, 1.0, 0.0}, std::tuple{-1.0, 0.0, 1.0}, std::tuple{2.0, 0.5, -0.25}}) {
        // Coefficients of a + b x + c y at Greville points reproduce the field exactly.
        std::vector<double> f(s.control_net().size());
        for (int j = 0; j < s.count_v(); ++j)
            for (int i = 0; i < s.count_u(); ++i) f[s.index(i, j)] = a + b * gu[i] + c * gv[j];
        double res = 0.0;
        for (int j = 0; j < s.count_v(); ++j)
            for (int i = 0; i < s.count_u(); ++i) {
                if (!interior(s, i, j)) continue;
                double r = 0.0;
                for (std::size_t m = 0; m < f.size(); ++m) r += K[s.index(i, j)][m] * f[m];
                res = std::max(res, std::abs(r));
            }
        CHECK(res <= 1e-12);
    }
    CHECK(elliptic_residual(s) <= 1e-12);
}

TEST_CASE("elliptic fixed points") {
    const NurbsSurface sq = k_refine(unit_square());
    const EllipticResult r = elliptic_improve(sq);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    for (std::size_t k = 0; k < sq.control_net().size(); ++k)
        CHECK((r.surface.control_net()[k] - sq.control_net()[k]).norm() <= 1e-10);

    const NurbsSurface para = k_refine(bilinear({0, 0}, {2, 0}, {0.7, 1.5}, {2.7, 1.5}));
    CHECK(elliptic_residual(para) <= 1e-10);
    const EllipticResult rp = elliptic_improve(para);
    CHECK(rp.converged);
    for (std::size_t k = 0; k < para.control_net().size(); ++k)
        CHECK((rp.surface.control_net()[k] - para.control_net()[k]).norm() <= 1e-10);
}

TEST_CASE("elliptic keeps boundary data bit-identical") {
    for (const char* name : {"annulus", "l_channel"}) {
        CAPTURE(name);
        const NurbsSurface s = k_refine(linear_only_pipeline(match_boundaries(corpus().at(name)).brep));
        const EllipticResult r = elliptic_improve(s);
        REQUIRE(r.surface.count_u() == s.count_u());
        REQUIRE(r.surface.count_v() == s.count_v());
        for (int j = 0; j < s.count_v(); ++j)
            for (int i = 0; i < s.count_u(); ++i) {
                if (interior(s, i, j)) continue;
                CHECK(r.surface.control(i, j) == s.control(i, j));
                CHECK(r.surface.weight(i, j) == s.weight(i, j));
            }
        CHECK(r.final_residual <= r.initial_residual);
        CHECK(r.residual_history.front() == r.initial_residual);
    }
}

TEST_CASE("generated surfaces reproduce the boundary") {
    for (const auto& [name, in] : corpus()) {
        CAPTURE(name);
        const Brep b = match_boundaries(in).brep;
        const NurbsSurface coons = linear_only_pipeline(b);
        const NurbsSurface refined = k_refine(coons);
        for (const auto* s : {&coons, &refined}) {
            const auto& ku = s->knots_u();
            const auto& kv = s->knots_v();
            double worst = 0.0;
            for (int k = 0; k < 500; ++k) {
                const double f = k / 499.0;
                const double u = ku.front() + f * ku.range(), v = kv.front() + f * kv.range();
                const auto at = [&](const NurbsCurve& c) { return curve_eval(c, c.t0() + f * (c.t1() - c.t0())); };
                worst = std::max(worst, (surface_eval(*s, u, kv.front()) - at(b.south)).norm());
                worst = std::max(worst, (surface_eval(*s, u, kv.back()) - at(b.north)).norm());
                worst = std::max(worst, (surface_eval(*s, ku.front(), v) - at(b.west)).norm());
                worst = std::max(worst, (surface_eval(*s, ku.back(), v) - at(b.east)).norm());
            }
            CHECK(worst <= 1e-10);
        }
    }
}

TEST_CASE("poisson with zero data is zero") {
    const NurbsSurface s = k_refine(linear_only_pipeline(corpus_annulus()));
    const auto c = poisson_solve(s, PoissonProblem::zero());
    for (double x : c) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("poisson rates on the identity square") {
    const auto rows = poisson_demo(unit_square());
    REQUIRE(rows.size() == 4);
    const auto& a = rows[2];
    const auto& b = rows[3];
    CHECK(b.h == doctest::Approx(a.h / 2));
    CHECK(b.dofs > a.dofs);
    CHECK(std::abs(rate(a.l2_error, b.l2_error, a.h, b.h) - 3.0) <= 0.2);
    CHECK(std::abs(rate(a.h1_error, b.h1_error, a.h, b.h) - 2.0) <= 0.2);
}

TEST_CASE("poisson H1 rate on the annulus") {
    PoissonOptions o;
    o.levels = 6;
    const auto rows = poisson_demo(linear_only_pipeline(corpus_annulus()), o);
    const auto& a = rows[rows.size() - 2];
    const auto& b = rows.back();
    CHECK(std::abs(rate(a.h1_error, b.h1_error, a.h, b.h) - 2.0) <= 0.2);
}

TEST_CASE("poisson input handling and CSV") {
    CHECK_THROWS_AS(poisson_demo(linear_only_pipeline(corpus_s_channel())), NumericalError);
    PoissonOptions o;
    o.levels = 1;
    const auto rows = poisson_demo(unit_square(), o);
    CHECK(rows.size() == 1);
    const std::string csv = convergence_csv(rows);
    std::istringstream in(csv);
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "level,h,dofs,l2_error,h1_error");
    CHECK(std::count(row.begin(), row.end(), ',') == 4);
    CHECK(!std::getline(in, extra));
    o.levels = 0;
    CHECK_THROWS_AS(poisson_demo(unit_square(), o), InputError);
}

TEST_CASE("elliptic options are validated") {
    EllipticOptions o;
    o.max_picard_iters = 0;
    CHECK_THROWS_AS(validate(o), InputError);
    o = {};
    o.update_tol = -1.0;
    CHECK_THROWS_AS(validate(o), InputError);
}

}  // TEST_SUITE
