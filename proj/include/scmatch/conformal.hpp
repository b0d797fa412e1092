#pragma once

// Schwarz-Christoffel map from the unit disk onto a polygonal approximation of
// the domain, solved in cross-ratio form over a Delaunay triangulation, and
// the auxiliary disk -> rectangle map used to pair West/East boundary markers.
//
// Prevertices are stored as arc gaps between consecutive prevertices rather
// than absolute arguments. Every angle difference is summed from gaps, so
// clusters of prevertices far below the spacing of doubles near 2*pi
// (crowding) stay resolved.

#include "scmatch/brep.hpp"

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace scmatch {

using Complex = std::complex<double>;

struct Polygon {
    std::vector<Complex> vertices;  // counterclockwise
    std::vector<double> betas;      // turning exponents, alpha/pi - 1
    std::array<int, 4> corners{};   // SW, SE, NE, NW vertex indices, cyclic order
    std::vector<Side> edge_sides;   // edge k joins vertex k and k+1

    int size() const noexcept { return static_cast<int>(vertices.size()); }
    double diameter() const;
};

/// Checks the Polygon invariants; throws InputError.
void validate_polygon(const Polygon& poly);

/// Distance from z to the polygon boundary.
double boundary_distance(const Polygon& poly, Complex z);

struct QuadSet {
    std::vector<std::array<int, 2>> diagonals;
    std::vector<std::array<int, 4>> quads;  // counterclockwise, diagonal joins entries 0 and 2
    std::vector<double> target_logs;        // log |cross ratio| of each quad
};

struct QuadratureConfig {
    int points = 8;  // nodes per panel
};

/// A point on the unit circle: the prevertex `anchor` rotated by `offset`.
struct CirclePoint {
    int anchor = 0;
    double offset = 0.0;
};

struct ScDiskMap {
    std::vector<double> gaps;  // gaps[k] = arg z_{k+1} - arg z_k, summing to 2*pi
    std::vector<double> betas;
    Complex scale{1.0, 0.0};      // C
    Complex center_image{0.0, 0.0};  // f(0)
    QuadratureConfig quadrature;
    std::array<int, 3> pinned{};
    double residual = 0.0;            // max |F_i|
    double alignment_residual = 0.0;  // max |f(z_k) - w_k|
    int iterations = 0;
    std::vector<std::string> warnings;

    int size() const noexcept { return static_cast<int>(gaps.size()); }
    /// Argument of each prevertex, with z_{pinned[0]} at angle 0.
    std::vector<double> arguments() const;
    std::vector<Complex> prevertices() const;
    /// arg z_j - arg z_i wrapped to (-pi, pi], summed over the shorter chain of gaps.
    double angle_between(int i, int j) const;
    /// |z_i - z_j| computed from gaps.
    double chord(int i, int j) const;
    Complex point(const CirclePoint& p) const;
};

Complex cross_ratio(Complex a, Complex b, Complex c, Complex d);

/// Samples the four curves into one closed counterclockwise polygon.
Polygon polygonize(const Brep& brep, double chord_tol);

struct SplitOptions {
    double kappa = 1.5;
};
Polygon split_long_edges(const Polygon& poly, const SplitOptions& opts = {});

/// Constrained Delaunay triangulation on the polygon vertices, one quad per diagonal.
QuadSet delaunay_quads(const Polygon& poly);

/// Triangles (counterclockwise vertex triples) of the constrained Delaunay triangulation.
std::vector<std::array<int, 3>> constrained_delaunay(const Polygon& poly);

/// f(z) along the straight path path_from -> z.
Complex sc_eval(const ScDiskMap& map, Complex z, Complex path_from = Complex{0.0, 0.0});

/// f at a point of the unit circle, integrated along the ray from the origin.
Complex sc_eval_boundary(const ScDiskMap& map, const CirclePoint& p);

/// Integral of the SC integrand from 0 to the circle point (no scale or shift).
Complex ray_integral(const ScDiskMap& map, const CirclePoint& p);

struct SolverOptions {
    double tol = 1e-10;          // target max |F_i|
    double accept_tol = 1e-8;    // failure threshold after max_iter
    int max_iter = 100;
    int restart_every = 30;
    int max_halvings = 10;
    QuadratureConfig quadrature;
};

/// Evaluates the cross-ratio residual F for given prevertex gaps.
std::vector<double> parameter_residual(const ScDiskMap& map, const QuadSet& quads);

ScDiskMap solve_parameter_problem(const Polygon& poly, const QuadSet& quads,
                                  const SolverOptions& opts = {});
/// Convenience overload that triangulates first.
ScDiskMap solve_parameter_problem(const Polygon& poly, const SolverOptions& opts = {});

struct RectMap {
    std::array<int, 4> corners{};  // prevertex indices: SW, SE, NE, NW
    ScDiskMap aux;                  // same prevertices, exponent -1/2 at the corners only
    std::array<Complex, 4> corner_images{};
    double modulus = 0.0;  // |West side| / |South side|

    /// Position along the long direction: 0 at South, 1 at North.
    double west_ordinate(const CirclePoint& p) const;
    double east_ordinate(const CirclePoint& p) const;
};

RectMap disk_to_rectangle(const ScDiskMap& map, const std::array<int, 4>& corners);

struct MarkerSet {
    std::vector<Point2> west;
    std::vector<Point2> east;
    std::vector<CirclePoint> west_circle;
    std::vector<CirclePoint> east_circle;
    std::vector<double> ordinates;
};

MarkerSet boundary_markers(const ScDiskMap& map, const RectMap& rect, int m);

}  // namespace scmatch
