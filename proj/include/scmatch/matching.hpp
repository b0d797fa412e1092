#pragma once

// Conformal boundary matching: markers from the disk -> rectangle map are
// projected onto the two long sides, and the free side is reparameterized
// piecewise-affinely so that its marker parameters coincide with the fixed
// side's. The free side keeps its geometry exactly.

#include "scmatch/brep.hpp"
#include "scmatch/conformal.hpp"

#include <string>
#include <vector>

namespace scmatch {

struct MarkerCorrespondence {
    std::vector<double> west_params;
    std::vector<double> east_params;
    std::vector<Point2> west_points;
    std::vector<Point2> east_points;

    int count() const noexcept { return static_cast<int>(west_params.size()); }
};

struct MatchOptions {
    int markers = 0;          // 0 picks max(8, control points of the longer long side)
    double chord_tol = 0.0;   // 0 picks 1e-3 * loop diameter
    Side fixed_side = Side::West;
    SolverOptions solver;
    SplitOptions split;
};

struct MatchProvenance {
    MarkerCorrespondence markers;
    std::vector<double> ordinates;
    double chord_tol = 0.0;
    int polygon_vertices = 0;
    double sc_residual = 0.0;
    double alignment_residual = 0.0;
    int sc_iterations = 0;
    double modulus = 0.0;
    Side fixed_side = Side::West;
    std::vector<std::string> warnings;
};

struct MatchedBrep {
    Brep brep;
    MatchProvenance provenance;
};

/// Closest-point parameters of ordered markers on a curve.
/// Throws NumericalError if a projection lands farther than max_distance
/// or the parameters are not strictly increasing.
std::vector<double> marker_params(const NurbsCurve& curve, const std::vector<Point2>& markers,
                                  double max_distance);

/// Piecewise-affine reparameterization sending own_params[i] to target_params[i].
NurbsCurve reparameterize_east(const NurbsCurve& east, const std::vector<double>& east_params,
                               const std::vector<double>& west_params);

/// Evaluates the piecewise-affine map own -> target at t.
double piecewise_affine(const std::vector<double>& from, const std::vector<double>& to, double t);

MatchedBrep match_boundaries(const Brep& brep, const MatchOptions& opts = {});

/// Effective marker count and chord tolerance for a given loop.
int default_marker_count(const Brep& brep);
double default_chord_tol(const Brep& brep);

}  // namespace scmatch
