#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "ceca/error.hpp"
#include "ceca/linalg.hpp"
#include "ceca/schedule.hpp"
#include "ceca/topology.hpp"

namespace ceca {

/// Stacked-form matrices of one DSGD-CECA step:
///   [x+; y+] = W [x; y] - gamma Wg [g; h].
struct MixingPair {
    Eigen::MatrixXd W;
    Eigen::MatrixXd Wg;
    int r = 0;
    int delta_r = 0;
};

/// Assembles W and Wg for round r from the round's communication matrix P.
inline MixingPair build_mixing(const BinarySchedule& schedule, int r, const CommMatrix& comm) {
    schedule.check_round(r);
    const int n = schedule.agents();
    if (comm.size() != n) throw ArgumentError("build_mixing: communication matrix has wrong dimension");
    if (comm.round() != r) throw ArgumentError("build_mixing: communication matrix belongs to another round");

    const StepCoefficients c = step_coefficients(schedule, r);
    const Eigen::MatrixXd p = comm.dense();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    // Self part and partner part for the x and y rows.
    const Eigen::MatrixXd x_self = c.a * eye;
    const Eigen::MatrixXd x_peer = (1.0 - c.a) * p;
    const Eigen::MatrixXd y_self = c.b * eye;
    const Eigen::MatrixXd y_peer = (1.0 - c.b) * p;

    MixingPair m{Eigen::MatrixXd::Zero(2 * n, 2 * n), Eigen::MatrixXd::Zero(2 * n, 2 * n), r, c.delta_r};
    if (c.delta_r == 1) {
        // z = x: partner contributions come from the x columns.
        m.W.topLeftCorner(n, n) = x_self + x_peer;
        m.W.bottomLeftCorner(n, n) = y_peer;
        m.W.bottomRightCorner(n, n) = y_self;
        m.Wg.topLeftCorner(n, n) = x_self + x_peer;
        m.Wg.bottomLeftCorner(n, n) = y_self + y_peer;
    } else {
        // z = y: partner contributions come from the y columns.
        m.W.topLeftCorner(n, n) = x_self;
        m.W.topRightCorner(n, n) = x_peer;
        m.W.bottomRightCorner(n, n) = y_self + y_peer;
        m.Wg.topRightCorner(n, n) = x_self + x_peer;
        m.Wg.bottomRightCorner(n, n) = y_self + y_peer;
    }
    return m;
}

inline MixingPair build_mixing(const BinarySchedule& schedule, int r, PortModel mode) {
    return build_mixing(schedule, r, comm_matrix(schedule, r, mode));
}

/// Structure check for the block family
///   [[c W11, (1-c) W12], [d W21, (1-d) W22]],  Wij doubly stochastic, c, d in [0, 1].
struct FamilyCheckReport {
    bool row_stochastic = false;
    bool nonnegative = false;
    bool blocks_doubly_stochastic_after_rescale = false;
    bool scalars_in_range = false;
    double c = 0.0;
    double d = 0.0;
    double max_residual = 0.0;  // worst violation over all checks
    std::string failure;        // first failing check, empty on pass

    bool passed() const noexcept {
        return row_stochastic && nonnegative && blocks_doubly_stochastic_after_rescale && scalars_in_range;
    }
};

/// c is recovered as the common row sum of the top-left block and d of the bottom-left
/// block. Every block's row and column sums must equal its scalar (c, 1-c, d, 1-d);
/// with nonnegativity that certifies a scaled doubly stochastic block.
inline FamilyCheckReport verify_family(const Eigen::MatrixXd& m, double tol) {
    FamilyCheckReport rep;
    if (m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() == 0) {
        rep.failure = "matrix is not square with even dimension";
        rep.max_residual = std::numeric_limits<double>::infinity();
        return rep;
    }
    const Eigen::Index n = m.rows() / 2;
    auto note = [&](double residual, const char* what) {
        rep.max_residual = std::max(rep.max_residual, residual);
        if (residual > tol && rep.failure.empty()) rep.failure = what;
        return residual <= tol;
    };

    const double min_entry = m.minCoeff();
    rep.nonnegative = note(std::max(0.0, -min_entry), "negative entry");
    rep.row_stochastic = note((m.rowwise().sum().array() - 1.0).abs().maxCoeff(), "row sums differ from 1");

    rep.c = m.topLeftCorner(n, n).rowwise().sum().mean();
    rep.d = m.bottomLeftCorner(n, n).rowwise().sum().mean();
    rep.scalars_in_range = note(std::max({-rep.c, rep.c - 1.0, -rep.d, rep.d - 1.0, 0.0}), "block scalar outside [0, 1]");

    auto block_residual = [](const Eigen::MatrixXd& b, double scalar) {
        const double rows = (b.rowwise().sum().array() - scalar).abs().maxCoeff();
        const double cols = (b.colwise().sum().array() - scalar).abs().maxCoeff();
        return std::max(rows, cols);
    };
    const double blocks = std::max({block_residual(m.topLeftCorner(n, n), rep.c),
                                    block_residual(m.topRightCorner(n, n), 1.0 - rep.c),
                                    block_residual(m.bottomLeftCorner(n, n), rep.d),
                                    block_residual(m.bottomRightCorner(n, n), 1.0 - rep.d)});
    rep.blocks_doubly_stochastic_after_rescale = note(blocks, "block is not a scaled doubly stochastic matrix");
    return rep;
}

/// Left-multiplied product W^(t) ... W^(0) with r = k mod tau.
inline Eigen::MatrixXd product_consensus(const BinarySchedule& schedule, PortModel mode, int t) {
    if (t < 0) throw ArgumentError("product_consensus: t must be >= 0");
    const int n = schedule.agents();
    Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (int k = 0; k <= t; ++k) prod = build_mixing(schedule, schedule.round_at(k), mode).W * prod;
    return prod;
}

/// Expected value of product_consensus for t = tau - 1 and t >= tau; empty for earlier t.
inline std::optional<Eigen::MatrixXd> product_consensus_closed_form(int n, int tau, int t) {
    if (t < tau - 1) return std::nullopt;
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, n);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    out.topLeftCorner(n, n) = ones / n;
    if (t == tau - 1) {
        out.bottomLeftCorner(n, n) = (ones - Eigen::MatrixXd::Identity(n, n)) / (n - 1);
    } else {
        out.bottomLeftCorner(n, n) = ones / n;
    }
    return out;
}

/// True iff A B stays in the family at tolerance tol.
inline bool semigroup_check(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol = 1e-12) {
    return verify_family(a * b, tol).passed();
}

/// blockdiag(11^T / n, 11^T / n) for a 2n x 2n matrix.
inline Eigen::MatrixXd block_averaging_matrix(Eigen::Index n) {
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    avg.topLeftCorner(n, n).setConstant(1.0 / static_cast<double>(n));
    avg.bottomRightCorner(n, n).setConstant(1.0 / static_cast<double>(n));
    return avg;
}

/// max |M D - D M| with D the block averaging matrix.
inline double commutation_check(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() % 2 != 0) throw ArgumentError("commutation_check: need square even dimension");
    const Eigen::MatrixXd avg = block_averaging_matrix(m.rows() / 2);
    return (m * avg - avg * m).cwiseAbs().maxCoeff();
}

}  // namespace ceca
