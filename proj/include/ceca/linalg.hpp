#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "ceca/error.hpp"

namespace ceca {

struct PowerIterationOptions {
    double rel_tol = 1e-9;
    int max_iterations = 200000;
};

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
/// Stops when successive Rayleigh quotients agree to rel_tol; throws ConvergenceError
/// (carrying the last estimate) when max_iterations is reached first.
inline double top_eigenvalue_psd(const Eigen::MatrixXd& s, PowerIterationOptions opts = {}) {
    if (s.rows() != s.cols() || s.rows() == 0) throw ArgumentError("top_eigenvalue_psd: need a non-empty square matrix");
    if (!s.allFinite()) throw NumericalError("top_eigenvalue_psd: non-finite entries");
    const Eigen::Index n = s.rows();
    // Deterministic start with no symmetry to avoid landing orthogonal to the top eigenvector.
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + static_cast<double>(i + 1) / static_cast<double>(2 * n + 1);
    v.normalize();
    double estimate = v.dot(s * v);
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd w = s * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = v.dot(s * v);
        if (std::abs(next - estimate) <= opts.rel_tol * std::abs(next)) return next;
        estimate = next;
    }
    throw ConvergenceError("power iteration did not converge after " + std::to_string(opts.max_iterations) +
                               " iterations (last estimate " + std::to_string(estimate) + ")",
                           estimate);
}

/// Spectral norm via power iteration on M^T M.
inline double operator_norm(const Eigen::MatrixXd& m, PowerIterationOptions opts = {}) {
    if (!m.allFinite()) throw NumericalError("operator_norm: non-finite entries");
    try {
        return std::sqrt(top_eigenvalue_psd(m.transpose() * m, opts));
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(e.what(), std::sqrt(e.last_estimate()));
    }
}

}  // namespace ceca
