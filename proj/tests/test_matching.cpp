#include "helpers.hpp"

#include "scmatch/conformal.hpp"
#include "scmatch/error.hpp"
#include "scmatch/io.hpp"
#include "scmatch/matching.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace scmatch;
using testutil::line;
using testutil::quarter_circle;

namespace {

const MatchedBrep& matched(const std::string& name) {
    static std::map<std::string, MatchedBrep> cache;
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, match_boundaries(corpus().at(name))).first;
    return it->second;
}

}  // namespace

TEST_SUITE("matching") {

TEST_CASE("marker_params on simple curves") {
    const NurbsCurve seg = line({0, 0}, {10, 0});
    const auto p = marker_params(seg, {{0, 0}, {5, 0}, {10, 0}}, 1e-6);
    REQUIRE(p.size() == 3);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p[2] == 1.0);

    const auto arc = quarter_circle();
    std::vector<Point2> markers;
    for (double deg : {0.0, 45.0, 90.0}) {
        const double a = deg * std::numbers::pi / 180.0;
        markers.emplace_back(std::cos(a), std::sin(a));
    }
    const auto q = marker_params(arc, markers, 1e-6);
    for (std::size_t k = 0; k < markers.size(); ++k)
        CHECK(std::abs(q[k] - testutil::brute_force_param(arc, markers[k])) <= 1e-6);

    // Reversed order and far-away markers are rejected.
    CHECK_THROWS_AS(marker_params(seg, {{10, 0}, {5, 0}, {0, 0}}, 1e-6), NumericalError);
    CHECK_THROWS_AS(marker_params(seg, {{0, 0}, {5, 3}, {10, 0}}, 1e-3), NumericalError);
}

TEST_CASE("reparameterize_east") {
    const auto arc = quarter_circle();
    const auto same = reparameterize_east(arc, {0.0, 1.0}, {0.0, 1.0});
    for (int k = 0; k <= 100; ++k) CHECK((curve_eval(same, k / 100.0) - curve_eval(arc, k / 100.0)).norm() <= 1e-13);

    const auto stretched = reparameterize_east(arc, {0.0, 1.0}, {0.0, 2.0});
    CHECK(stretched.t1() == 2.0);
    for (int k = 0; k <= 100; ++k) {
        const double x = k / 100.0;
        CHECK((curve_eval(stretched, 2 * x) - curve_eval(arc, x)).norm() <= 1e-13);
    }

    const std::vector<double> east{0.0, 0.3, 1.0}, west{0.0, 0.6, 1.0};
    const auto r = reparameterize_east(arc, east, west);
    CHECK((curve_eval(r, 0.6) - curve_eval(arc, 0.3)).norm() <= 1e-12);
    for (int k = 0; k <= 200; ++k) {
        const double x = k / 200.0;
        CHECK((curve_eval(r, piecewise_affine(east, west, x)) - curve_eval(arc, x)).norm() <= 1e-12);
    }
    CHECK_THROWS_AS(reparameterize_east(arc, {0.0, 0.5, 0.4, 1.0}, {0.0, 0.2, 0.6, 1.0}), InputError);
    CHECK_THROWS_AS(reparameterize_east(arc, {0.0, 1.0}, {0.0, 0.5, 1.0}), InputError);
}

TEST_CASE("piecewise_affine") {
    const std::vector<double> from{0.0, 0.5, 1.0}, to{0.0, 0.8, 2.0};
    CHECK(piecewise_affine(from, to, 0.25) == doctest::Approx(0.4));
    CHECK(piecewise_affine(from, to, 0.75) == doctest::Approx(1.4));
    CHECK(piecewise_affine(from, to, 1.0) == 2.0);
}

TEST_CASE("matching repairs a distorted 5:1 rectangle") {
    const Brep in = corpus_rectangle(5.0, true);
    const auto& m = matched("rect5");
    const auto& mc = m.provenance.markers;
    REQUIRE(mc.count() >= 8);
    // True conformal pairing on a rectangle is horizontal: find the matched East
    // parameter at each West marker's height and compare parameters.
    const NurbsCurve& east = m.brep.east;
    const double range = in.west.knots().range();
    for (int i = 0; i < mc.count(); ++i) {
        const double xi = mc.west_params[i];
        const double y = curve_eval(in.west, xi).y();
        const double eta = closest_point(east, Point2(1.0, y), xi).param;
        CHECK(std::abs(eta - xi) <= 1e-3 * range);
    }
    CHECK(m.provenance.sc_residual <= 1e-8);
    CHECK(std::abs(m.provenance.modulus - 5.0) <= 1e-3);
}

TEST_CASE("already matched rectangle is a fixed point") {
    const Brep in = corpus_rectangle(5.0, false);
    const MatchedBrep m = match_boundaries(in);
    for (int k = 0; k <= 200; ++k) {
        const double t = k / 200.0;
        CHECK((curve_eval(m.brep.east, t) - curve_eval(in.east, t)).norm() <= 1e-9);
    }
}

TEST_CASE("geometry and corner preservation on the corpus") {
    for (const auto& [name, in] : corpus()) {
        CAPTURE(name);
        const auto& m = matched(name);
        const auto& mc = m.provenance.markers;
        const double diam = in.diameter();
        // Sampled symmetric Hausdorff distance, 2000 samples each.
        constexpr int N = 2000;
        std::vector<Point2> a, b;
        for (int k = 0; k <= N; ++k) {
            a.push_back(curve_eval(in.east, in.east.t0() + (in.east.t1() - in.east.t0()) * k / N));
            b.push_back(curve_eval(m.brep.east, m.brep.east.t0() + (m.brep.east.t1() - m.brep.east.t0()) * k / N));
        }
        double h = 0.0;
        for (const auto& p : a) h = std::max(h, closest_point(m.brep.east, p, m.brep.east.t0()).distance);
        for (const auto& p : b) h = std::max(h, closest_point(in.east, p, in.east.t0()).distance);
        CHECK(h <= 1e-9 * diam);

        // Piecewise-affine identity.
        double worst = 0.0;
        for (int k = 0; k <= N; ++k) {
            const double x = in.east.t0() + (in.east.t1() - in.east.t0()) * k / N;
            const double y = piecewise_affine(mc.east_params, mc.west_params, x);
            worst = std::max(worst, (curve_eval(m.brep.east, y) - curve_eval(in.east, x)).norm());
        }
        CHECK(worst <= 1e-12 * std::max(1.0, diam));

        // West, South and North untouched; East endpoints kept.
        CHECK(m.brep.west.control_points() == in.west.control_points());
        CHECK(m.brep.south.control_points() == in.south.control_points());
        CHECK(m.brep.north.control_points() == in.north.control_points());
        CHECK((m.brep.east.front() - in.east.front()).norm() <= 1e-10);
        CHECK((m.brep.east.back() - in.east.back()).norm() <= 1e-10);
        CHECK(m.brep.east.t0() == in.west.t0());
        CHECK(m.brep.east.t1() == in.west.t1());

        // Marker correspondence invariants.
        CHECK(mc.count() >= 2);
        CHECK(mc.west_params.front() == in.west.t0());
        CHECK(mc.west_params.back() == in.west.t1());
        CHECK(mc.east_params.front() == in.east.t0());
        CHECK(mc.east_params.back() == in.east.t1());
        for (int i = 1; i < mc.count(); ++i) {
            CHECK(mc.west_params[i] > mc.west_params[i - 1]);
            CHECK(mc.east_params[i] > mc.east_params[i - 1]);
        }
    }
}

TEST_CASE("matching is idempotent up to tolerance") {
    for (const std::string name : {"rect5", "annulus", "l_channel"}) {
        CAPTURE(name);
        const auto& once = matched(name);
        // Same marker set as the first run: the default count follows the
        // control-point count, which reparameterization changes.
        MatchOptions o;
        o.markers = default_marker_count(corpus().at(name));
        o.chord_tol = once.provenance.chord_tol;
        const MatchedBrep twice = match_boundaries(once.brep, o);
        const auto& mc = twice.provenance.markers;
        for (int i = 0; i < mc.count(); ++i) CHECK(std::abs(mc.east_params[i] - mc.west_params[i]) <= 1e-6);
    }
}

TEST_CASE("fixed side East reparameterizes West instead") {
    MatchOptions o;
    o.fixed_side = Side::East;
    const Brep in = corpus_rectangle(5.0, true);
    const MatchedBrep m = match_boundaries(in, o);
    CHECK(m.brep.east.control_points() == in.east.control_points());
    CHECK(m.brep.east.knots().values() == in.east.knots().values());
    const auto& mc = m.provenance.markers;
    for (int i = 0; i < mc.count(); ++i)
        CHECK((curve_eval(m.brep.west, mc.east_params[i]) - curve_eval(in.west, mc.west_params[i])).norm() <= 1e-12);
}

TEST_CASE("defaults and option errors") {
    const Brep r = corpus_rectangle(5.0, true);
    CHECK(default_marker_count(r) == 8);
    CHECK(default_chord_tol(r) == doctest::Approx(1e-3 * r.diameter()));
    CHECK(default_marker_count(corpus_s_channel()) >= 8);
    MatchOptions o;
    o.markers = 1;
    CHECK_THROWS_AS(match_boundaries(r, o), InputError);
    o.markers = 0;
    o.fixed_side = Side::South;
    CHECK_THROWS_AS(match_boundaries(r, o), InputError);
}

TEST_CASE("stage name annotates errors") {
    MatchOptions o;
    o.solver.max_iter = 1;
    o.solver.tol = 1e-300;
    o.solver.accept_tol = 1e-300;
    CHECK_THROWS_WITH_AS(match_boundaries(corpus_l_channel(), o), doctest::Contains("solve_parameter_problem"),
                         NumericalError);
}

TEST_CASE("polygon does not depend on the boundary parameterization") {
    for (const Brep& b : {corpus_annulus(), corpus_s_channel(), corpus_l_channel()}) {
        Brep warped = b;
        warped.east = reparameterize_east(b.east, {0.0, 0.3, 1.0}, {0.0, 0.7, 1.0});
        const double tol = default_chord_tol(b);
        const Polygon p = polygonize(b, tol), q = polygonize(warped, tol);
        REQUIRE(p.size() == q.size());
        CHECK(p.corners == q.corners);
        for (int k = 0; k < p.size(); ++k) CHECK(std::abs(p.vertices[k] - q.vertices[k]) <= 1e-9 * p.diameter());
    }
}

}  // TEST_SUITE
