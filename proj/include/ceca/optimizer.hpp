#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "ceca/error.hpp"
#include "ceca/rng.hpp"
#include "ceca/schedule.hpp"
#include "ceca/topology.hpp"

namespace ceca {

/// Stacked local models (one row per agent) and the DSGD-CECA auxiliary copy.
struct OptimizerState {
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;
    std::int64_t k = 0;
    double gamma = 0.0;

    int agents() const noexcept { return static_cast<int>(x.rows()); }
    int dim() const noexcept { return static_cast<int>(x.cols()); }
};

inline OptimizerState make_optimizer_state(const Eigen::MatrixXd& x0, double gamma) {
    if (x0.rows() < 2 || x0.cols() < 1) throw ArgumentError("optimizer state needs >= 2 agents and d >= 1");
    return {x0, x0, 0, gamma};
}

/// oracle(point, agent, rng) -> gradient; agent is 1-based, rng is that agent's
/// stream for the current iteration.
template <class F>
concept GradientOracle = requires(F f, const Eigen::VectorXd& point, int agent, CounterStream& rng) {
    { f(point, agent, rng) } -> std::convertible_to<Eigen::VectorXd>;
};

/// What happened inside one step; filled on request for invariant checks.
struct StepTrace {
    StepCoefficients coeffs;
    Eigen::MatrixXd gradients;  // e^(k), one row per agent
    int gradient_evaluations = 0;
};

/// DSGD-CECA iteration with the communication matrices of one schedule cached.
///
/// Per step with r = k mod tau: delta_r = 1 evaluates the gradient at x and lets z = x,
/// delta_r = 0 evaluates it at y and lets z = y. Then
///   x+ = a (x - gamma e) + (1 - a) P (z - gamma e)
///   y+ = b (y - gamma e) + (1 - b) P (z - gamma e).
class DsgdCeca {
public:
    DsgdCeca(BinarySchedule schedule, PortModel mode, std::uint64_t seed)
        : schedule_(std::move(schedule)), mode_(mode), seed_(seed) {
        comms_.reserve(static_cast<std::size_t>(schedule_.rounds()));
        for (int r = 0; r < schedule_.rounds(); ++r) comms_.push_back(comm_matrix(schedule_, r, mode_));
    }

    const BinarySchedule& schedule() const noexcept { return schedule_; }
    PortModel mode() const noexcept { return mode_; }
    const CommMatrix& comm(int r) const { return comms_.at(static_cast<std::size_t>(r)); }

    template <GradientOracle Oracle>
    OptimizerState step(const OptimizerState& s, Oracle&& oracle, StepTrace* trace = nullptr) const {
        const int n = schedule_.agents();
        if (s.agents() != n || s.y.rows() != n || s.y.cols() != s.x.cols()) {
            throw ArgumentError("DsgdCeca::step: state shape does not match the schedule");
        }
        const int r = schedule_.round_at(s.k);
        const StepCoefficients c = step_coefficients(schedule_, r);
        const Eigen::MatrixXd& z = c.delta_r == 1 ? s.x : s.y;

        Eigen::MatrixXd e(n, s.dim());
        for (int i = 0; i < n; ++i) {
            CounterStream rng(seed_, StreamTag::gradient_noise, static_cast<std::uint32_t>(i + 1),
                              static_cast<std::uint32_t>(s.k));
            const Eigen::VectorXd point = z.row(i).transpose();
            Eigen::VectorXd g = oracle(point, i + 1, rng);
            if (g.size() != s.dim()) throw ArgumentError("gradient oracle returned wrong dimension");
            if (!g.allFinite()) {
                throw NumericalError("non-finite gradient at agent " + std::to_string(i + 1) + ", iteration " +
                                     std::to_string(s.k) + " (round " + std::to_string(r) + ")");
            }
            e.row(i) = g.transpose();
        }

        const Eigen::MatrixXd sent = z - s.gamma * e;
        const Eigen::MatrixXd received = comms_[static_cast<std::size_t>(r)].gather(sent);
        OptimizerState next;
        next.x = c.a * (s.x - s.gamma * e) + (1.0 - c.a) * received;
        next.y = c.b * (s.y - s.gamma * e) + (1.0 - c.b) * received;
        next.k = s.k + 1;
        next.gamma = s.gamma;
        if (trace) {
            trace->coeffs = c;
            trace->gradients = std::move(e);
            trace->gradient_evaluations = n;
        }
        return next;
    }

private:
    BinarySchedule schedule_;
    PortModel mode_;
    std::uint64_t seed_;
    std::vector<CommMatrix> comms_;
};

template <GradientOracle Oracle>
OptimizerState dsgd_ceca_step(const OptimizerState& state, Oracle&& oracle, const BinarySchedule& schedule,
                              PortModel mode, std::uint64_t seed = 0, StepTrace* trace = nullptr) {
    return DsgdCeca(schedule, mode, seed).step(state, std::forward<Oracle>(oracle), trace);
}

/// Replaces every row of x and y by the respective row mean. Only valid at k = 0.
inline OptimizerState initial_global_average(const OptimizerState& s) {
    if (s.k != 0) throw ArgumentError("initial_global_average: only allowed before the first iteration");
    OptimizerState out = s;
    out.x.rowwise() = s.x.colwise().mean();
    out.y.rowwise() = s.y.colwise().mean();
    return out;
}

/// Problem constants entering the step-size rule and the convergence bound.
struct RateParams {
    double delta = 0.0;   // E f(mean x^0) - f*
    double L = 0.0;       // smoothness
    double sigma2 = 0.0;  // gradient-noise variance
    double b2 = 0.0;      // heterogeneity bound
    double T = 0.0;       // horizon (iterations 0..T)

    void validate() const {
        if (!(L > 0.0)) throw ArgumentError("RateParams: L must be > 0");
        if (delta < 0.0 || sigma2 < 0.0 || b2 < 0.0 || T < 0.0) {
            throw ArgumentError("RateParams: delta, sigma2, b2, T must be nonnegative");
        }
    }
};

/// Step size gamma = 1 / [ sqrt(L s2 (T+1) / (2 n D)) + cbrt(24 L^2 tau^2 (s2 + 2 b2) (T+1) / D) + 8 tau L ].
inline double theorem_rate(const RateParams& p, int n, int tau) {
    p.validate();
    if (n < 1 || tau < 1) throw ArgumentError("theorem_rate: n and tau must be >= 1");
    if (p.delta == 0.0) throw ArgumentError("theorem_rate: zero initial suboptimality makes the rate undefined");
    const double t1 = p.T + 1.0;
    const double noise_term = std::sqrt(p.L * p.sigma2 * t1 / (2.0 * n * p.delta));
    const double drift_term = std::cbrt(24.0 * p.L * p.L * tau * tau * (p.sigma2 + 2.0 * p.b2) * t1 / p.delta);
    return 1.0 / (noise_term + drift_term + 8.0 * tau * p.L);
}

/// The three terms of the averaged squared-gradient bound, in order
/// (linear-speedup term, heterogeneity/transient term, deterministic term).
struct BoundTerms {
    double speedup = 0.0;
    double transient = 0.0;
    double deterministic = 0.0;

    double total() const noexcept { return speedup + transient + deterministic; }
};

inline BoundTerms right_hand_side_terms(const RateParams& p, int n, int tau) {
    p.validate();
    if (n < 1 || tau < 1) throw ArgumentError("right_hand_side_bound: n and tau must be >= 1");
    const double t1 = p.T + 1.0;
    BoundTerms out;
    out.speedup = 16.0 * std::sqrt(p.delta * p.L * p.sigma2 / (n * t1));
    out.transient = 24.0 * std::cbrt(p.delta * p.delta * p.L * p.L * tau * tau * (p.sigma2 + 2.0 * p.b2) / (t1 * t1));
    out.deterministic = 32.0 * tau * p.delta * p.L / t1;
    return out;
}

inline double right_hand_side_bound(const RateParams& p, int n, int tau) {
    return right_hand_side_terms(p, n, tau).total();
}

}  // namespace ceca
