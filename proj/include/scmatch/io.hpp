#pragma once

// JSON file formats for boundary loops and surfaces, SVG plotting, and the
// synthetic geometry corpus.
//
// B-Rep file (format "scmatch-brep", version 1):
//   { "format": "scmatch-brep", "version": 1,
//     "orientation": "<convention note>",
//     "curves": [ { "label": "West"|"East"|"South"|"North", "degree": p,
//                   "knots": [...], "control_points": [[x, y], ...],
//                   "weights": [...] }, ... ],
//     "provenance": { ... optional ... } }
// The four curves form a counterclockwise loop with
//   West(0) = South(0), South(1) = East(0), East(1) = North(1), North(0) = West(1)
// each within 1e-8. West and East run along eta, South and North along xi.
//
// Surface file (format "scmatch-surface", version 1):
//   { "format": "scmatch-surface", "version": 1, "degree_u", "degree_v",
//     "knots_u", "knots_v", "count_u", "count_v",
//     "control_points": [[x, y], ...]  (u fastest), "weights": [...],
//     "provenance": { "stages": [ { "name", "seconds", ... } ], ... } }
//
// Wall-clock values are always stored under keys named "seconds".

#include "scmatch/brep.hpp"
#include "scmatch/conformal.hpp"
#include "scmatch/matching.hpp"
#include "scmatch/splines.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace scmatch {

using Json = nlohmann::ordered_json;

Json curve_to_json(const NurbsCurve& c);
NurbsCurve curve_from_json(const Json& j, const std::string& where);

Json brep_to_json(const Brep& brep);
/// Validates the schema and loop closure; throws InputError.
Brep brep_from_json(const Json& j);

Json surface_to_json(const NurbsSurface& s);
NurbsSurface surface_from_json(const Json& j);

Json provenance_to_json(const MatchProvenance& p);

/// Debug dump of a solved map: polygon, quadrilaterals, prevertex arguments,
/// C, f(0) and residuals.
Json sc_debug_to_json(const Polygon& poly, const QuadSet& quads, const ScDiskMap& map);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Removes every "seconds" member recursively.
Json strip_timings(Json j);

enum class PlotMetric { None, ScaledJacobian, Uniformity };
PlotMetric plot_metric_from_string(const std::string& s);

struct PlotOptions {
    int iso = 11;             // isoparameter lines per direction
    int samples = 128;        // points per isoparameter polyline
    PlotMetric metric = PlotMetric::ScaledJacobian;
    double width = 800.0;     // canvas width in px; height follows the aspect ratio
};

std::string plot_svg(const NurbsSurface& s, const PlotOptions& opts = {});

/// Named synthetic test geometries.
std::map<std::string, Brep> corpus();

/// Individual corpus items.
Brep corpus_square();
Brep corpus_rectangle(double length, bool distorted_east);
Brep corpus_annulus();
Brep corpus_s_channel();
Brep corpus_l_channel();

}  // namespace scmatch
