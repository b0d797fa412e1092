#include "scmatch/io.hpp"

#include "scmatch/error.hpp"
#include "scmatch/quality.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scmatch {

namespace {

constexpr const char* kBrepFormat = "scmatch-brep";
constexpr const char* kSurfaceFormat = "scmatch-surface";
constexpr int kVersion = 1;
constexpr const char* kOrientation =
    "counterclockwise loop; West(0)=South(0), South(1)=East(0), East(1)=North(1), North(0)=West(1); "
    "West/East run along eta, South/North along xi";

Json points_to_json(const std::vector<Point2>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back({p.x(), p.y()});
    return a;
}

const Json& member(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw InputError(where + ": missing field \"" + key + "\"");
    return *it;
}

std::vector<double> number_list(const Json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw InputError(where + ": expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<Point2> point_list(const Json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array of [x, y] pairs");
    std::vector<Point2> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw InputError(where + ": expected an array of [x, y] pairs");
        out.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    return out;
}

int integer(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) throw InputError(where + ": expected an integer");
    return j.get<int>();
}

void check_format(const Json& j, const char* format) {
    const auto& f = member(j, "format", "file");
    if (!f.is_string() || f.get<std::string>() != format)
        throw InputError(std::string("file: format must be \"") + format + "\"");
    if (integer(member(j, "version", "file"), "version") != kVersion)
        throw InputError("file: unsupported version");
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    std::string s(buf);
    if (s == "-0.000") s = "0.000";
    return s;
}

/// Diverging scale on [-1, 1]: red at -1, white at 0, blue at 1.
std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const std::array<double, 3> white{247, 247, 247}, blue{33, 102, 172}, red{178, 24, 43};
    const auto& end = t >= 0.0 ? blue : red;
    const double a = std::abs(t);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(white[0] + a * (end[0] - white[0]))),
                  static_cast<int>(std::lround(white[1] + a * (end[1] - white[1]))),
                  static_cast<int>(std::lround(white[2] + a * (end[2] - white[2]))));
    return buf;
}

}  // namespace

Json curve_to_json(const NurbsCurve& c) {
    Json j;
    j["degree"] = c.degree();
    j["knots"] = c.knots().values();
    j["control_points"] = points_to_json(c.control_points());
    j["weights"] = c.weights();
    return j;
}

NurbsCurve curve_from_json(const Json& j, const std::string& where) {
    const int degree = integer(member(j, "degree", where), where + ".degree");
    auto knots = number_list(member(j, "knots", where), where + ".knots");
    auto pts = point_list(member(j, "control_points", where), where + ".control_points");
    std::vector<double> w;
    if (j.contains("weights")) w = number_list(j["weights"], where + ".weights");
    try {
        return NurbsCurve(KnotVector(std::move(knots), degree), std::move(pts), std::move(w));
    } catch (const InputError& e) {
        throw InputError(where + ": " + e.what());
    }
}

Json brep_to_json(const Brep& brep) {
    Json j;
    j["format"] = kBrepFormat;
    j["version"] = kVersion;
    j["orientation"] = kOrientation;
    Json curves = Json::array();
    for (Side s : {Side::West, Side::East, Side::South, Side::North}) {
        Json c;
        c["label"] = to_string(s);
        const Json body = curve_to_json(brep.get(s));
        for (auto& [k, v] : body.items()) c[k] = v;
        curves.push_back(c);
    }
    j["curves"] = curves;
    return j;
}

Brep brep_from_json(const Json& j) {
    check_format(j, kBrepFormat);
    const auto& curves = member(j, "curves", "file");
    if (!curves.is_array()) throw InputError("file: \"curves\" must be an array");
    Brep brep;
    std::array<bool, 4> seen{};
    for (const auto& c : curves) {
        const auto& label = member(c, "label", "curve");
        if (!label.is_string()) throw InputError("curve: label must be a string");
        const Side side = side_from_string(label.get<std::string>());
        auto& flag = seen[static_cast<int>(side)];
        if (flag) throw InputError("duplicate curve label \"" + to_string(side) + "\"");
        flag = true;
        brep.get(side) = curve_from_json(c, to_string(side));
    }
    for (Side s : {Side::West, Side::East, Side::South, Side::North})
        if (!seen[static_cast<int>(s)]) throw InputError("missing curve label \"" + to_string(s) + "\"");
    brep.check_closed();
    return brep;
}

Json surface_to_json(const NurbsSurface& s) {
    Json j;
    j["format"] = kSurfaceFormat;
    j["version"] = kVersion;
    j["degree_u"] = s.degree_u();
    j["degree_v"] = s.degree_v();
    j["knots_u"] = s.knots_u().values();
    j["knots_v"] = s.knots_v().values();
    j["count_u"] = s.count_u();
    j["count_v"] = s.count_v();
    j["control_points"] = points_to_json(s.control_net());
    j["weights"] = s.weights();
    return j;
}

NurbsSurface surface_from_json(const Json& j) {
    check_format(j, kSurfaceFormat);
    const int pu = integer(member(j, "degree_u", "surface"), "degree_u");
    const int pv = integer(member(j, "degree_v", "surface"), "degree_v");
    auto ku = number_list(member(j, "knots_u", "surface"), "knots_u");
    auto kv = number_list(member(j, "knots_v", "surface"), "knots_v");
    auto pts = point_list(member(j, "control_points", "surface"), "control_points");
    std::vector<double> w;
    if (j.contains("weights")) w = number_list(j["weights"], "weights");
    KnotVector KU(std::move(ku), pu), KV(std::move(kv), pv);
    if (j.contains("count_u") && integer(j["count_u"], "count_u") != KU.count())
        throw InputError("surface: count_u does not match knots_u");
    if (j.contains("count_v") && integer(j["count_v"], "count_v") != KV.count())
        throw InputError("surface: count_v does not match knots_v");
    return NurbsSurface(std::move(KU), std::move(KV), std::move(pts), std::move(w));
}

Json provenance_to_json(const MatchProvenance& p) {
    Json j;
    j["fixed_side"] = to_string(p.fixed_side);
    j["chord_tol"] = p.chord_tol;
    j["polygon_vertices"] = p.polygon_vertices;
    j["sc_residual"] = p.sc_residual;
    j["alignment_residual"] = p.alignment_residual;
    j["sc_iterations"] = p.sc_iterations;
    j["modulus"] = p.modulus;
    Json m;
    m["count"] = p.markers.count();
    m["ordinates"] = p.ordinates;
    m["west_params"] = p.markers.west_params;
    m["east_params"] = p.markers.east_params;
    m["west_points"] = points_to_json(p.markers.west_points);
    m["east_points"] = points_to_json(p.markers.east_points);
    j["markers"] = m;
    j["warnings"] = p.warnings;
    return j;
}

namespace {

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

}  // namespace

Json sc_debug_to_json(const Polygon& poly, const QuadSet& quads, const ScDiskMap& map) {
    Json j;
    j["format"] = "scmatch-scmap";
    j["version"] = kVersion;
    Json p;
    Json verts = Json::array();
    for (const Complex& w : poly.vertices) verts.push_back(complex_to_json(w));
    p["vertices"] = verts;
    p["betas"] = poly.betas;
    p["corners"] = poly.corners;
    Json sides = Json::array();
    for (Side s : poly.edge_sides) sides.push_back(to_string(s));
    p["edge_sides"] = sides;
    j["polygon"] = p;
    Json q;
    q["diagonals"] = quads.diagonals;
    q["quads"] = quads.quads;
    q["target_logs"] = quads.target_logs;
    j["quads"] = q;
    Json m;
    m["arguments"] = map.arguments();
    m["gaps"] = map.gaps;
    m["pinned"] = map.pinned;
    m["scale"] = complex_to_json(map.scale);
    m["center_image"] = complex_to_json(map.center_image);
    m["residual"] = map.residual;
    m["alignment_residual"] = map.alignment_residual;
    m["iterations"] = map.iterations;
    m["quadrature_points"] = map.quadrature.points;
    m["warnings"] = map.warnings;
    j["map"] = m;
    return j;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InputError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json strip_timings(Json j) {
    if (j.is_object()) {
        j.erase("seconds");
        for (auto& [k, v] : j.items()) v = strip_timings(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timings(v);
    }
    return j;
}

PlotMetric plot_metric_from_string(const std::string& s) {
    if (s == "sj") return PlotMetric::ScaledJacobian;
    if (s == "unif") return PlotMetric::Uniformity;
    if (s == "none") return PlotMetric::None;
    throw InputError("unknown plot metric \"" + s + "\" (expected sj, unif or none)");
}

std::string plot_svg(const NurbsSurface& s, const PlotOptions& opts) {
    if (opts.iso < 2 || opts.samples < 2) throw InputError("plot: need at least 2 isolines and 2 samples");
    const auto& KU = s.knots_u();
    const auto& KV = s.knots_v();
    const auto at = [](const KnotVector& k, int i, int n) {
        return i == n - 1 ? k.back() : k.front() + k.range() * i / (n - 1);
    };
    // Bounding box from dense boundary samples.
    Eigen::AlignedBox2d box;
    for (int k = 0; k < opts.samples; ++k) {
        const double u = at(KU, k, opts.samples), v = at(KV, k, opts.samples);
        box.extend(surface_eval(s, u, KV.front()));
        box.extend(surface_eval(s, u, KV.back()));
        box.extend(surface_eval(s, KU.front(), v));
        box.extend(surface_eval(s, KU.back(), v));
    }
    const double margin = 10.0;
    const Vector2 ext = box.sizes().cwiseMax(1e-12);
    const double scale = (opts.width - 2 * margin) / ext.x();
    const double height = std::min(ext.y() * scale + 2 * margin, 20000.0);
    const double sy = std::min(scale, (height - 2 * margin) / ext.y());
    const double sc = std::min(scale, sy);
    const auto X = [&](const Point2& p) { return num(margin + (p.x() - box.min().x()) * sc); };
    const auto Y = [&](const Point2& p) { return num(height - margin - (p.y() - box.min().y()) * sc); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(opts.width) << "\" height=\"" << num(height)
       << "\" viewBox=\"0 0 " << num(opts.width) << ' ' << num(height) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    if (opts.metric != PlotMetric::None) {
        const double r_area = opts.metric == PlotMetric::Uniformity ? area_ratio(s) : 1.0;
        const int cells = opts.iso - 1;
        const int edge = std::max(2, opts.samples / cells);
        os << "<g stroke=\"none\">\n";
        for (int j = 0; j < cells; ++j) {
            for (int i = 0; i < cells; ++i) {
                const double u0 = at(KU, i, opts.iso), u1 = at(KU, i + 1, opts.iso);
                const double v0 = at(KV, j, opts.iso), v1 = at(KV, j + 1, opts.iso);
                const double uc = 0.5 * (u0 + u1), vc = 0.5 * (v0 + v1);
                double value = 0.0;
                if (opts.metric == PlotMetric::ScaledJacobian)
                    value = scaled_jacobian(s, uc, vc).value;
                else
                    value = 1.0 - uniformity(s, uc, vc, r_area);
                os << "<polygon fill=\"" << diverging_color(value) << "\" points=\"";
                const auto emit = [&](double u, double v) {
                    const Point2 p = surface_eval(s, u, v);
                    os << X(p) << ',' << Y(p) << ' ';
                };
                for (int k = 0; k < edge; ++k) emit(u0 + (u1 - u0) * k / edge, v0);
                for (int k = 0; k < edge; ++k) emit(u1, v0 + (v1 - v0) * k / edge);
                for (int k = 0; k < edge; ++k) emit(u1 - (u1 - u0) * k / edge, v1);
                for (int k = 0; k < edge; ++k) emit(u0, v1 - (v1 - v0) * k / edge);
                os << "\"/>\n";
            }
        }
        os << "</g>\n";
    }

    const auto polyline = [&](bool along_u, double fixed, const char* attrs) {
        os << "<polyline fill=\"none\" " << attrs << " points=\"";
        for (int k = 0; k < opts.samples; ++k) {
            const Point2 p = along_u ? surface_eval(s, at(KU, k, opts.samples), fixed)
                                     : surface_eval(s, fixed, at(KV, k, opts.samples));
            os << X(p) << ',' << Y(p) << (k + 1 < opts.samples ? " " : "");
        }
        os << "\"/>\n";
    };
    os << "<g>\n";
    for (int i = 1; i + 1 < opts.iso; ++i) {
        polyline(true, at(KV, i, opts.iso), "stroke=\"#404040\" stroke-width=\"0.6\"");
        polyline(false, at(KU, i, opts.iso), "stroke=\"#404040\" stroke-width=\"0.6\"");
    }
    polyline(true, KV.front(), "stroke=\"#000000\" stroke-width=\"1.5\"");
    polyline(true, KV.back(), "stroke=\"#000000\" stroke-width=\"1.5\"");
    polyline(false, KU.front(), "stroke=\"#000000\" stroke-width=\"1.5\"");
    polyline(false, KU.back(), "stroke=\"#000000\" stroke-width=\"1.5\"");
    os << "</g>\n</svg>\n";
    return os.str();
}

}  // namespace scmatch
