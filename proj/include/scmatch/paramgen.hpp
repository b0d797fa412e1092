#pragma once

// Surface parameterization from a four-sided B-Rep: compatibility
// preprocessing, bilinear Coons blending, k-refinement, elliptic (quasi-harmonic)
// improvement and an isogeometric Poisson convergence study.
//
// Surface convention: u (xi) runs along South/North, v (eta) along West/East.
// West = column 0, East = last column, South = row 0, North = last row.

#include "scmatch/brep.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace scmatch {

struct EllipticOptions {
    // Cross direction xi (between West and East; ruled after Coons with straight short sides).
    int target_degree_xi = 2;
    int extra_knots_xi = 2;
    // Along direction eta; degrees are only ever raised.
    int target_degree_eta = 2;
    int extra_knots_eta = 0;
    int max_picard_iters = 20;
    double update_tol = 1e-8;          // relative max control-point displacement
    double jacobian_floor_rel = 1e-12;  // floor = this * median |J|
    int quad_points = 0;               // per direction per span; 0 means degree + 1
};

/// Throws InputError if any option is out of range.
void validate(const EllipticOptions& opts);

/// Same degree and knots for both curves; geometry unchanged.
std::pair<NurbsCurve, NurbsCurve> make_compatible(const NurbsCurve& a, const NurbsCurve& b);

/// Bilinear Coons patch of compatible opposite sides. Warnings (weight fallback) are appended when given.
NurbsSurface coons_patch(const Brep& brep, std::vector<std::string>* warnings = nullptr);

/// make_compatible on both side pairs, then coons_patch.
NurbsSurface linear_only_pipeline(const Brep& brep, std::vector<std::string>* warnings = nullptr);

/// Degree elevation and uniform knot insertion in both directions.
NurbsSurface k_refine(const NurbsSurface& s, const EllipticOptions& opts = {});

struct EllipticResult {
    NurbsSurface surface;
    int iterations = 0;
    bool converged = false;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    std::vector<double> residual_history;  // one entry per accepted geometry, starting with the input
    int floored_points = 0;
    int damping_steps = 0;
    std::vector<std::string> warnings;
};

/// Weak residual of the quasi-harmonic system at the given geometry: the
/// stiffness with A = 1/|J| applied to the parametric coordinate fields,
/// restricted to interior basis functions. Returns the Euclidean norm.
double elliptic_residual(const NurbsSurface& s, const EllipticOptions& opts = {});

/// Symmetric stiffness matrix (all basis functions) at fixed geometry, dense, for testing.
std::vector<std::vector<double>> elliptic_stiffness_dense(const NurbsSurface& s, const EllipticOptions& opts = {});

/// Picard iteration for the quasi-harmonic system; boundary control data stays bit-identical.
EllipticResult elliptic_improve(const NurbsSurface& s, const EllipticOptions& opts = {});

struct ConvergenceRow {
    int level = 0;
    double h = 0.0;
    int dofs = 0;  // free (interior) coefficients
    double l2_error = 0.0;
    double h1_error = 0.0;
};

struct PoissonProblem {
    std::function<double(double, double)> exact;
    std::function<Vector2(double, double)> gradient;
    std::function<double(double, double)> source;  // f in -lap u = f

    /// u = sin(2 pi x) sin(2 pi y), f = 8 pi^2 u.
    static PoissonProblem sine();
    static PoissonProblem zero();
};

struct PoissonOptions {
    int levels = 4;
    int degree = 2;             // both directions are elevated to at least this
    int initial_refinements = 2;  // uniform dyadic refinements before level 0
    PoissonProblem problem = PoissonProblem::sine();
};

/// Uniform h-refinement study with Dirichlet data on the whole boundary.
std::vector<ConvergenceRow> poisson_demo(const NurbsSurface& s, const PoissonOptions& opts = {});

/// Discrete solution coefficients on the given surface's basis (no refinement).
std::vector<double> poisson_solve(const NurbsSurface& s, const PoissonProblem& problem);

std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

}  // namespace scmatch
