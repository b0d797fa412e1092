#include "scmatch/quadrature.hpp"

#include "scmatch/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace scmatch {

QuadRule gauss_jacobi(int n, double alpha, double beta) {
    if (n < 1) throw InputError("gauss_jacobi: need at least one node");
    if (!(alpha > -1.0) || !(beta > -1.0)) throw InputError("gauss_jacobi: exponents must exceed -1");
    const double ab = alpha + beta;
    Eigen::VectorXd diag(n);
    Eigen::VectorXd off(n > 1 ? n - 1 : 0);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + ab;
        diag(k) = (k == 0) ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + ab;
        if (k == 1) {
            // The (k + alpha + beta) and (s - 1) factors cancel at k = 1.
            off(0) = std::sqrt(4.0 * (1.0 + alpha) * (1.0 + beta) / ((s * s) * (s + 1.0)));
        } else {
            off(k - 1) = std::sqrt(4.0 * k * (k + alpha) * (k + beta) * (k + ab) /
                                   ((s * s) * (s + 1.0) * (s - 1.0)));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                                std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
    QuadRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        rule.weights[k] = mu0 * v0 * v0;
    }
    return rule;
}

}  // namespace scmatch
