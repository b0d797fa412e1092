#pragma once

// Parameterization quality: scaled Jacobian, area uniformity and fold detection
// sampled on an inclusive uniform grid of the parameter rectangle.

#include "scmatch/splines.hpp"

#include <optional>
#include <string>

namespace scmatch {

struct ScaledJacobian {
    double value = 0.0;
    bool degenerate = false;  // a tangent vanished; value is 0
};

/// det J / (|x_u| |x_v|).
ScaledJacobian scaled_jacobian(const NurbsSurface& s, double u, double v);

/// Signed Jacobian determinant of the map at (u, v).
double jacobian_det(const NurbsSurface& s, double u, double v);

/// | det J / r_area - 1 |.
double uniformity(const NurbsSurface& s, double u, double v, double r_area);

/// Area of the image over area of the parameter rectangle.
double area_ratio(const NurbsSurface& s);

struct QualityReport {
    int n_u = 0;
    int n_v = 0;
    double min_sj = 0.0;
    double avg_sj = 0.0;
    std::optional<double> max_unif;  // omitted when folded
    std::optional<double> avg_unif;
    bool fold = false;
    int degenerate_points = 0;
    double r_area = 0.0;
};

QualityReport quality_report(const NurbsSurface& s, int n_u = 1001, int n_v = 1001);

/// Header `geometry,method,grid,min_sj,avg_sj,max_unif,avg_unif,fold`.
std::string quality_csv_header();
std::string quality_csv_row(const std::string& geometry, const std::string& method, const QualityReport& r);

}  // namespace scmatch
