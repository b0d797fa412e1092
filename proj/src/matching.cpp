#include "scmatch/matching.hpp"

#include "scmatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scmatch {

namespace {

constexpr int kProjectionSamples = 512;
constexpr double kMinMarkerGap = 1e-8;

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InputError& e) {
        throw InputError(std::string(stage) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(stage) + ": " + e.what(), e.residual());
    }
}

void require_increasing(const std::vector<double>& v, const char* what) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1]))
            throw InputError(std::string("reparameterize_east: ") + what + " parameters not strictly increasing");
}

}  // namespace

int default_marker_count(const Brep& brep) {
    const auto longer = [&]() -> const NurbsCurve& {
        // "Longer" by control-polygon length.
        const auto len = [](const NurbsCurve& c) {
            double s = 0.0;
            for (int k = 1; k < c.size(); ++k) s += (c.control_points()[k] - c.control_points()[k - 1]).norm();
            return s;
        };
        return len(brep.west) >= len(brep.east) ? brep.west : brep.east;
    };
    return std::max(8, longer().size());
}

double default_chord_tol(const Brep& brep) { return 1e-3 * brep.diameter(); }

std::vector<double> marker_params(const NurbsCurve& curve, const std::vector<Point2>& markers,
                                  double max_distance) {
    const double a = curve.t0(), b = curve.t1();
    std::vector<double> ts(kProjectionSamples);
    std::vector<Point2> ps(kProjectionSamples);
    for (int k = 0; k < kProjectionSamples; ++k) {
        ts[k] = (k == kProjectionSamples - 1) ? b : a + (b - a) * k / (kProjectionSamples - 1);
        ps[k] = curve_eval(curve, ts[k]);
    }
    std::vector<double> out;
    out.reserve(markers.size());
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const Point2& m = markers[i];
        std::size_t best = 0;
        double bd = (ps[0] - m).squaredNorm();
        for (std::size_t k = 1; k < ps.size(); ++k) {
            const double d = (ps[k] - m).squaredNorm();
            if (d < bd) {
                bd = d;
                best = k;
            }
        }
        const auto r = closest_point(curve, m, ts[best]);
        if (r.distance > max_distance) {
            std::ostringstream msg;
            msg << "marker_params: marker " << i << " projects at distance " << r.distance << " > "
                << max_distance << " (wrong side label?)";
            throw NumericalError(msg.str(), r.distance);
        }
        if (!out.empty() && !(r.param > out.back())) {
            std::ostringstream msg;
            msg << "marker_params: parameters not increasing at marker " << i
                << " (marker/curve orientation mismatch?)";
            throw NumericalError(msg.str());
        }
        out.push_back(r.param);
    }
    return out;
}

double piecewise_affine(const std::vector<double>& from, const std::vector<double>& to, double t) {
    const auto it = std::upper_bound(from.begin() + 1, from.end() - 1, t);
    const std::size_t k = static_cast<std::size_t>(it - from.begin()) - 1;
    const double s = (t - from[k]) / (from[k + 1] - from[k]);
    return to[k] + s * (to[k + 1] - to[k]);
}

NurbsCurve reparameterize_east(const NurbsCurve& east, const std::vector<double>& east_params,
                               const std::vector<double>& west_params) {
    const std::size_t m = east_params.size();
    if (m < 2 || west_params.size() != m)
        throw InputError("reparameterize_east: need two equal-length parameter lists with at least 2 entries");
    require_increasing(east_params, "east");
    require_increasing(west_params, "west");
    const double tol = 1e-10 * std::max(1.0, east.knots().range());
    if (std::abs(east_params.front() - east.t0()) > tol || std::abs(east_params.back() - east.t1()) > tol)
        throw InputError("reparameterize_east: east parameters must start and end at the knot range ends");

    std::vector<NurbsCurve> segments;
    segments.reserve(m - 1);
    NurbsCurve rest = east;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        auto [left, right] = split_curve(rest, east_params[i]);
        segments.push_back(std::move(left));
        rest = std::move(right);
    }
    segments.push_back(std::move(rest));
    for (std::size_t i = 0; i < segments.size(); ++i)
        segments[i] = reparam_to_range(segments[i], west_params[i], west_params[i + 1]);
    return merge_curves(segments);
}

MatchedBrep match_boundaries(const Brep& brep, const MatchOptions& opts) {
    run_stage("input", [&] {
        brep.check_closed();
        return 0;
    });
    MatchedBrep out;
    out.brep = brep;
    auto& prov = out.provenance;
    prov.fixed_side = opts.fixed_side;
    if (opts.fixed_side != Side::West && opts.fixed_side != Side::East)
        throw InputError("match_boundaries: fixed side must be West or East");
    prov.chord_tol = opts.chord_tol > 0.0 ? opts.chord_tol : default_chord_tol(brep);
    const int m = opts.markers > 0 ? opts.markers : default_marker_count(brep);
    if (m < 2) throw InputError("match_boundaries: need at least 2 markers");

    const Polygon poly = run_stage("polygonize", [&] { return polygonize(brep, prov.chord_tol); });
    const Polygon split = run_stage("split_long_edges", [&] { return split_long_edges(poly, opts.split); });
    prov.polygon_vertices = split.size();
    const QuadSet quads = run_stage("delaunay_quads", [&] { return delaunay_quads(split); });
    const ScDiskMap map =
        run_stage("solve_parameter_problem", [&] { return solve_parameter_problem(split, quads, opts.solver); });
    prov.sc_residual = map.residual;
    prov.alignment_residual = map.alignment_residual;
    prov.sc_iterations = map.iterations;
    prov.warnings = map.warnings;
    const RectMap rect = run_stage("disk_to_rectangle", [&] { return disk_to_rectangle(map, split.corners); });
    prov.modulus = rect.modulus;
    const MarkerSet markers = run_stage("boundary_markers", [&] { return boundary_markers(map, rect, m); });

    const double max_dist = 10.0 * prov.chord_tol;
    auto west_params = run_stage("marker_params", [&] { return marker_params(brep.west, markers.west, max_dist); });
    auto east_params = run_stage("marker_params", [&] { return marker_params(brep.east, markers.east, max_dist); });
    // Corners pair exactly with the range ends.
    west_params.front() = brep.west.t0();
    west_params.back() = brep.west.t1();
    east_params.front() = brep.east.t0();
    east_params.back() = brep.east.t1();

    auto& mc = prov.markers;
    const double wtol = kMinMarkerGap * brep.west.knots().range();
    const double etol = kMinMarkerGap * brep.east.knots().range();
    for (int i = 0; i < m; ++i) {
        const bool last = (i == m - 1);
        if (!mc.west_params.empty()) {
            const bool close = west_params[i] - mc.west_params.back() < wtol ||
                               east_params[i] - mc.east_params.back() < etol;
            if (close) {
                prov.warnings.push_back("dropped near-coincident marker " + std::to_string(last ? i - 1 : i));
                if (!last) continue;
                if (mc.count() == 1) throw NumericalError("match_boundaries: all markers coincide");
                mc.west_params.pop_back();
                mc.east_params.pop_back();
                mc.west_points.pop_back();
                mc.east_points.pop_back();
                prov.ordinates.pop_back();
            }
        }
        mc.west_params.push_back(west_params[i]);
        mc.east_params.push_back(east_params[i]);
        mc.west_points.push_back(markers.west[i]);
        mc.east_points.push_back(markers.east[i]);
        prov.ordinates.push_back(markers.ordinates[i]);
    }

    run_stage("reparameterize", [&] {
        if (opts.fixed_side == Side::West)
            out.brep.east = reparameterize_east(brep.east, mc.east_params, mc.west_params);
        else
            out.brep.west = reparameterize_east(brep.west, mc.west_params, mc.east_params);
        return 0;
    });
    return out;
}

}  // namespace scmatch
