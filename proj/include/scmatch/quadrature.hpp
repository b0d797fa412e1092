#pragma once

#include <vector>

namespace scmatch {

/// Nodes and weights on [-1, 1].
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Jacobi rule for the weight (1 - x)^alpha (1 + x)^beta, alpha, beta > -1.
/// Built by the Golub-Welsch eigenvalue method.
QuadRule gauss_jacobi(int n, double alpha, double beta);

inline QuadRule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

}  // namespace scmatch
