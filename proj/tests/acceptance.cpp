// Acceptance runner: one PASS/FAIL line per criterion with its measured values
// and runtime. Exit status is the number of failed criteria.

#include "helpers.hpp"
#include "oracles.hpp"

#include "scmatch/conformal.hpp"
#include "scmatch/io.hpp"
#include "scmatch/matching.hpp"
#include "scmatch/paramgen.hpp"
#include "scmatch/quality.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace scmatch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    /// Records a named measurement and whether it met its bound.
    void expect(bool ok, const std::string& what) {
        if (detail.tellp() > 0) detail << "; ";
        detail << what << (ok ? "" : " [FAILED]");
        pass = pass && ok;
    }
};

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;
    std::function<void(Outcome&)> body;
};

// ------------------------------------------------------------------ 1

void lemma_one(Outcome& o) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> su(0.01, 100.0), tu(-50.0, 50.0), xu(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int p = 1 + static_cast<int>(rng() % 5);
        const KnotVector kv = testutil::random_knots(rng, p);
        const double s = su(rng), t = tu(rng), xi = xu(rng);
        std::vector<double> mapped;
        for (double k : kv.values()) mapped.push_back(s * k + t);
        const KnotVector km(mapped, p);
        const double x = std::clamp(s * xi + t, km.front(), km.back());
        for (int i = 0; i < kv.count(); ++i)
            worst = std::max(worst, std::abs(basis_eval(km, i, x) - basis_eval(kv, i, xi)));
    }
    o.expect(worst <= 1e-13, "1000 cases, max error " + sci(worst) + " <= 1e-13");
}

// ------------------------------------------------------------------ 2

void geometry_preservation(Outcome& o) {
    for (const auto& [name, in] : corpus()) {
        const MatchedBrep m = match_boundaries(in);
        const auto& mc = m.provenance.markers;
        const NurbsCurve& a = in.east;
        const NurbsCurve& b = m.brep.east;
        constexpr int N = 2000;
        double h = 0.0, pa = 0.0;
        for (int k = 0; k < N; ++k) {
            const double f = static_cast<double>(k) / (N - 1);
            const double ta = a.t0() + f * (a.t1() - a.t0()), tb = b.t0() + f * (b.t1() - b.t0());
            h = std::max(h, closest_point(b, curve_eval(a, ta), tb).distance);
            h = std::max(h, closest_point(a, curve_eval(b, tb), ta).distance);
            pa = std::max(pa, (curve_eval(b, piecewise_affine(mc.east_params, mc.west_params, ta)) - curve_eval(a, ta))
                                  .norm());
        }
        const double diam = in.diameter();
        o.expect(pa <= 1e-12, name + ": affine identity " + sci(pa));
        o.expect(h <= 1e-9 * diam, name + ": Hausdorff/diam " + sci(h / diam));
    }
}

// ------------------------------------------------------------------ 3, 4

struct Solved {
    Polygon poly;
    ScDiskMap map;
};

Solved solve(const Brep& b) {
    Solved s;
    s.poly = split_long_edges(polygonize(b, default_chord_tol(b)));
    s.map = solve_parameter_problem(s.poly, delaunay_quads(s.poly));
    return s;
}

void sc_oracles(Outcome& o) {
    const Solved sq = solve(corpus_square());
    double gap_err = 0.0;
    for (double g : oracle::normalized_gaps(sq.map.prevertices()))
        gap_err = std::max(gap_err, std::abs(g - std::numbers::pi / 2));
    o.expect(gap_err <= 1e-6, "square gap error (gauge-normalized) " + sci(gap_err));
    o.expect(sq.map.residual <= 1e-8, "square |F|inf " + sci(sq.map.residual));

    const Solved r = solve(corpus_rectangle(5.0, false));
    const double modulus = disk_to_rectangle(r.map, r.poly.corners).modulus;
    o.expect(std::abs(modulus - 5.0) <= 1e-3, "5:1 modulus " + std::to_string(modulus));
    const auto z = r.map.prevertices();
    const auto& c = r.poly.corners;
    const double rho = std::abs(cross_ratio(z[c[0]], z[c[1]], z[c[2]], z[c[3]]));
    const double expect = oracle::rectangle_cross_ratio(5.0);
    o.expect(std::abs(rho - expect) <= 1e-6 * expect, "corner cross ratio vs elliptic integrals, rel " +
                                                          sci(std::abs(rho - expect) / expect));
}

void conformality(Outcome& o) {
    const Solved s = solve(corpus_square());
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> rad(0.0, 0.9), ang(0.0, 2 * std::numbers::pi);
    const double h = 1e-5;
    double cr = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Complex z = std::polar(rad(rng), ang(rng));
        const Complex fx = (sc_eval(s.map, z + h) - sc_eval(s.map, z - h)) / (2 * h);
        const Complex fy = (sc_eval(s.map, z + Complex(0, h)) - sc_eval(s.map, z - Complex(0, h))) / (2 * h);
        const double scale = std::abs(fx);
        cr = std::max({cr, std::abs(fx.real() - fy.imag()) / scale, std::abs(fy.real() + fx.imag()) / scale});
    }
    o.expect(cr <= 1e-4, "Cauchy-Riemann rel " + sci(cr));
    double bd = 0.0;
    for (int k = 0; k < 200; ++k) bd = std::max(bd, boundary_distance(s.poly, sc_eval(s.map, std::polar(1.0, ang(rng)))));
    o.expect(bd <= 1e-5 * s.poly.diameter(), "boundary distance/diam " + sci(bd / s.poly.diameter()));
}

// ------------------------------------------------------------------ 5

void rectangle_pairing(Outcome& o) {
    const Brep in = corpus_rectangle(5.0, true);
    const MatchedBrep m = match_boundaries(in);
    const auto& mc = m.provenance.markers;
    double worst = 0.0;
    for (int i = 0; i < mc.count(); ++i) {
        const double xi = mc.west_params[i];
        const double y = curve_eval(in.west, xi).y();
        worst = std::max(worst, std::abs(closest_point(m.brep.east, Point2(1.0, y), xi).param - xi));
    }
    o.expect(worst <= 1e-3, std::to_string(mc.count()) + " markers, max |eta - xi| " + sci(worst));
}

// ------------------------------------------------------------------ 6, 7

void fold_repair(Outcome& o) {
    const Brep in = corpus_s_channel();
    const QualityReport before = quality_report(linear_only_pipeline(in));
    const QualityReport after = quality_report(linear_only_pipeline(match_boundaries(in).brep));
    o.expect(before.fold, "unmatched min sj " + sci(before.min_sj) + " (fold)");
    o.expect(after.min_sj > 0.0, "matched min sj " + sci(after.min_sj));
}

void elliptic(Outcome& o) {
    const NurbsSurface s = k_refine(linear_only_pipeline(match_boundaries(corpus_s_channel()).brep));
    const EllipticOptions opts;
    const EllipticResult r = elliptic_improve(s, opts);
    const double ratio = r.initial_residual / r.final_residual;
    o.expect(ratio >= 10.0, "residual " + sci(r.initial_residual) + " -> " + sci(r.final_residual) + " (x" +
                                sci(ratio) + ")");
    bool fixed = true;
    for (int j = 0; j < s.count_v(); ++j)
        for (int i = 0; i < s.count_u(); ++i)
            if (i == 0 || j == 0 || i + 1 == s.count_u() || j + 1 == s.count_v())
                fixed = fixed && r.surface.control(i, j) == s.control(i, j) && r.surface.weight(i, j) == s.weight(i, j);
    o.expect(fixed, "boundary control data unchanged");
    o.expect(r.iterations <= opts.max_picard_iters,
             std::to_string(r.iterations) + " iterations" + (r.converged ? " (converged)" : ""));
}

// ------------------------------------------------------------------ 8

void quality_suite(Outcome& o) {
    const auto id = quality_report(testutil::bilinear({0, 0}, {1, 0}, {0, 1}, {1, 1}), 101, 101);
    o.expect(id.min_sj == 1.0 && id.avg_sj == 1.0 && id.max_unif == 0.0 && id.avg_unif == 0.0,
             "identity (" + sci(id.min_sj) + ", " + sci(id.max_unif.value_or(-1)) + ")");
    const auto sh = quality_report(testutil::bilinear({0, 0}, {1, 0}, {1, 1}, {2, 1}), 101, 101);
    o.expect(std::abs(sh.min_sj - 0.7071067812) <= 1e-9 && std::abs(sh.avg_sj - 0.7071067812) <= 1e-9,
             "shear " + std::to_string(sh.min_sj));
    const auto re = quality_report(testutil::bilinear({0, 0}, {0, 1}, {1, 0}, {1, 1}), 101, 101);
    o.expect(re.fold && !re.max_unif, "reflection fold");
    const auto sc = quality_report(testutil::bilinear({0, 0}, {3, 0}, {0, 3}, {3, 3}), 101, 101);
    o.expect(sc.max_unif && *sc.max_unif <= 1e-12, "scale x3 max unif " + sci(sc.max_unif.value_or(-1)));
}

// ------------------------------------------------------------------ 9

void poisson(Outcome& o) {
    const auto rows = poisson_demo(testutil::bilinear({0, 0}, {1, 0}, {0, 1}, {1, 1}));
    const auto& a = rows[rows.size() - 2];
    const auto& b = rows.back();
    const double hr = std::log(a.h / b.h);
    const double l2 = std::log(a.l2_error / b.l2_error) / hr, h1 = std::log(a.h1_error / b.h1_error) / hr;
    o.expect(rows.size() == 4, std::to_string(rows.size()) + " levels");
    o.expect(std::abs(l2 - 3.0) <= 0.2, "L2 rate " + std::to_string(l2));
    o.expect(std::abs(h1 - 2.0) <= 0.2, "H1 rate " + std::to_string(h1));
}

// ------------------------------------------------------------------ 10

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// Content with wall-clock fields removed: JSON loses its "seconds" members.
std::string comparable(const fs::path& p) {
    const std::string text = slurp(p);
    if (p.extension() == ".json") return strip_timings(Json::parse(text)).dump();
    return text;
}

void determinism(Outcome& o) {
    const fs::path root = fs::temp_directory_path() / "scmatch_acceptance";
    fs::remove_all(root);
    // {command line with @ for the run directory, outputs to compare}
    const std::vector<std::pair<std::string, std::vector<std::string>>> steps{
        {"corpus --out @/corpus", {"corpus/s_channel.json", "corpus/annulus.json", "corpus/l_channel.json"}},
        {"match @/corpus/s_channel.json --out @/s_m.json", {"s_m.json"}},
        {"match @/corpus/annulus.json --out @/a_m.json --fixed-side East", {"a_m.json"}},
        {"surface @/s_m.json --out @/s_c.json", {"s_c.json"}},
        {"surface @/a_m.json --method pde --out @/a_p.json", {"a_p.json"}},
        {"quality @/s_c.json --grid 201 --field @/field.csv --out @/q.csv", {"q.csv", "field.csv"}},
        {"plot @/s_c.json --out @/s.svg", {"s.svg"}},
        {"plot @/a_p.json --metric unif --out @/a.svg", {"a.svg"}},
        {"poisson @/a_p.json --levels 3 --out @/p.csv", {"p.csv"}},
        {"scmap @/corpus/l_channel.json --out @/scmap.json", {"scmap.json"}},
    };
    for (const auto& [cmd, outs] : steps) {
        for (const char* run : {"a", "b"}) {
            const fs::path dir = root / run;
            fs::create_directories(dir);
            std::string line = cmd;
            for (std::size_t p; (p = line.find('@')) != std::string::npos;) line.replace(p, 1, dir.string());
            const std::string shell = std::string(SCMATCH_CLI) + " " + line + " >" + (dir / "stdout.txt").string() +
                                      " 2>" + (dir / "stderr.txt").string();
            const int status = std::system(shell.c_str());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                o.expect(false, "'" + cmd.substr(0, cmd.find(' ')) + "' exited with status " + std::to_string(status));
                return;
            }
        }
        bool same = comparable(root / "a/stdout.txt") == comparable(root / "b/stdout.txt");
        for (const auto& f : outs) same = same && comparable(root / "a" / f) == comparable(root / "b" / f);
        o.expect(same, cmd.substr(0, cmd.find(' ')) + (same ? " identical" : " differs"));
    }
    fs::remove_all(root);
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "Lemma 1 basis invariance", 5, lemma_one},
        {2, "Geometry preservation", 30, geometry_preservation},
        {3, "SC square/rectangle oracle", 60, sc_oracles},
        {4, "Conformality", 30, conformality},
        {5, "Rectangle pairing", 60, rectangle_pairing},
        {6, "Fold repair", 120, fold_repair},
        {7, "Elliptic improvement", 120, elliptic},
        {8, "Quality metric suite", 5, quality_suite},
        {9, "Poisson convergence", 120, poisson},
        {10, "Determinism", 60, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.expect(secs < c.budget_seconds, sci(secs) + " s < " + sci(c.budget_seconds) + " s");
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.title << ": " << o.detail.str()
                  << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed;
}
