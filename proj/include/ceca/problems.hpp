#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ceca/csv.hpp"
#include "ceca/error.hpp"
#include "ceca/linalg.hpp"
#include "ceca/rng.hpp"

namespace ceca {

/// Distributed least squares: f_i(x) = 0.5 ||A_i x - b_i||^2, f = mean of f_i.
struct LeastSquaresProblem {
    std::vector<Eigen::MatrixXd> A;  // n blocks of N x d
    std::vector<Eigen::VectorXd> b;  // n vectors of length N
    Eigen::VectorXd x_star_gen;      // generating solution
    double sigma_s = 0.0;            // measurement noise std
    double sigma_n = 0.0;            // gradient noise std
    std::uint64_t seed = 0;

    int agents() const noexcept { return static_cast<int>(A.size()); }
    int samples() const noexcept { return A.empty() ? 0 : static_cast<int>(A.front().rows()); }
    int dim() const noexcept { return static_cast<int>(x_star_gen.size()); }

    const Eigen::MatrixXd& design(int agent) const { return A.at(checked(agent)); }
    const Eigen::VectorXd& measurements(int agent) const { return b.at(checked(agent)); }

private:
    std::size_t checked(int agent) const {
        if (agent < 1 || agent > agents()) throw ArgumentError("agent " + std::to_string(agent) + " out of range");
        return static_cast<std::size_t>(agent - 1);
    }
};

struct LeastSquaresSizes {
    int n = 0;
    int N = 0;
    int d = 0;
    double sigma_s = 0.0;
    double sigma_n = 0.0;
};

/// n = 258 agents, d = 10, N = 50 rows each, measurement noise 0.1, gradient noise 5.
inline constexpr LeastSquaresSizes kPaperPreset{258, 50, 10, 0.1, 5.0};
/// Small configuration for fast checks.
inline constexpr LeastSquaresSizes kDeskPreset{16, 20, 5, 0.1, 1.0};

/// A_i entries and x_star_gen are i.i.d. N(0, 1); b_i = A_i x_star_gen + v_i with v_i ~ N(0, sigma_s^2 I).
/// Every draw comes from a counter stream keyed by (seed, purpose, agent), so the
/// problem is a pure function of its arguments.
inline LeastSquaresProblem make_least_squares(int n, int N, int d, double sigma_s, double sigma_n, std::uint64_t seed) {
    if (n < 1 || N < 1 || d < 1) throw ArgumentError("make_least_squares: n, N, d must be >= 1");
    if (sigma_s < 0.0 || sigma_n < 0.0) throw ArgumentError("make_least_squares: noise levels must be >= 0");
    LeastSquaresProblem p;
    p.sigma_s = sigma_s;
    p.sigma_n = sigma_n;
    p.seed = seed;
    p.x_star_gen.resize(d);
    CounterStream gen(seed, StreamTag::generator_solution, 0, 0);
    for (int j = 0; j < d; ++j) p.x_star_gen(j) = gen.normal(static_cast<std::uint64_t>(j));

    p.A.reserve(static_cast<std::size_t>(n));
    p.b.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        CounterStream entries(seed, StreamTag::design_matrix, static_cast<std::uint32_t>(i), 0);
        Eigen::MatrixXd a(N, d);
        for (int row = 0; row < N; ++row) {
            for (int col = 0; col < d; ++col) a(row, col) = entries.normal(static_cast<std::uint64_t>(row) * d + col);
        }
        CounterStream noise(seed, StreamTag::measurement_noise, static_cast<std::uint32_t>(i), 0);
        Eigen::VectorXd rhs = a * p.x_star_gen;
        if (sigma_s > 0.0) {
            for (int row = 0; row < N; ++row) rhs(row) += sigma_s * noise.normal(static_cast<std::uint64_t>(row));
        }
        p.A.push_back(std::move(a));
        p.b.push_back(std::move(rhs));
    }
    return p;
}

inline LeastSquaresProblem make_least_squares(const LeastSquaresSizes& s, std::uint64_t seed) {
    return make_least_squares(s.n, s.N, s.d, s.sigma_s, s.sigma_n, seed);
}

inline double local_objective(const LeastSquaresProblem& p, int agent, const Eigen::VectorXd& x) {
    return 0.5 * (p.design(agent) * x - p.measurements(agent)).squaredNorm();
}

/// f(x) = (1/n) sum_i f_i(x).
inline double objective(const LeastSquaresProblem& p, const Eigen::VectorXd& x) {
    double total = 0.0;
    for (int i = 1; i <= p.agents(); ++i) total += local_objective(p, i, x);
    return total / p.agents();
}

/// A_i^T (A_i x - b_i).
inline Eigen::VectorXd exact_gradient(const LeastSquaresProblem& p, int agent, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd& a = p.design(agent);
    return a.transpose() * (a * x - p.measurements(agent));
}

/// Gradient of the global objective f.
inline Eigen::VectorXd global_gradient(const LeastSquaresProblem& p, const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.dim());
    for (int i = 1; i <= p.agents(); ++i) g += exact_gradient(p, i, x);
    return g / p.agents();
}

/// exact_gradient + eps with eps ~ N(0, sigma_n^2 I) drawn from rng.
inline Eigen::VectorXd stochastic_gradient(const LeastSquaresProblem& p, int agent, const Eigen::VectorXd& x,
                                           CounterStream& rng) {
    Eigen::VectorXd g = exact_gradient(p, agent, x);
    if (p.sigma_n > 0.0) {
        for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += p.sigma_n * rng.next_normal();
    }
    return g;
}

struct GlobalOptimum {
    Eigen::VectorXd x_opt;
    double f_opt = 0.0;
};

/// Solves (sum A_i^T A_i) x = sum A_i^T b_i.
inline GlobalOptimum global_optimum(const LeastSquaresProblem& p) {
    const int d = p.dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int i = 1; i <= p.agents(); ++i) {
        h += p.design(i).transpose() * p.design(i);
        rhs += p.design(i).transpose() * p.measurements(i);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    const double scale = h.diagonal().cwiseAbs().maxCoeff();
    const auto diag = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || scale == 0.0 || diag.minCoeff() <= 1e-12 * scale) {
        throw NumericalError("global_optimum: normal equations are singular");
    }
    GlobalOptimum out;
    out.x_opt = ldlt.solve(rhs);
    out.f_opt = objective(p, out.x_opt);
    return out;
}

/// max_i lambda_max(A_i^T A_i).
inline double smoothness_constant(const LeastSquaresProblem& p) {
    double l = 0.0;
    for (int i = 1; i <= p.agents(); ++i) {
        l = std::max(l, top_eigenvalue_psd(p.design(i).transpose() * p.design(i)));
    }
    return l;
}

/// Empirical heterogeneity max_x (1/n) sum_i ||grad f_i(x) - grad f(x)||^2 over the given points.
/// An estimate of b^2, not the supremum.
inline double heterogeneity_estimate(const LeastSquaresProblem& p, const std::vector<Eigen::VectorXd>& points) {
    double worst = 0.0;
    for (const auto& x : points) {
        const Eigen::VectorXd g = global_gradient(p, x);
        double acc = 0.0;
        for (int i = 1; i <= p.agents(); ++i) acc += (exact_gradient(p, i, x) - g).squaredNorm();
        worst = std::max(worst, acc / p.agents());
    }
    return worst;
}

/// Text bundle: header line, sizes line, x_star_gen line, then one line per
/// A row and per b vector. Values use 17 significant digits and round-trip exactly.
inline void write_problem(std::ostream& os, const LeastSquaresProblem& p) {
    os << "ceca-least-squares,1\n";
    os << "n,N,d,sigma_s,sigma_n,seed\n";
    os << p.agents() << ',' << p.samples() << ',' << p.dim() << ',' << format_double(p.sigma_s) << ','
       << format_double(p.sigma_n) << ',' << p.seed << '\n';
    os << "x_star_gen";
    for (Eigen::Index j = 0; j < p.x_star_gen.size(); ++j) os << ',' << format_double(p.x_star_gen(j));
    os << '\n';
    for (int i = 1; i <= p.agents(); ++i) {
        const auto& a = p.design(i);
        for (Eigen::Index row = 0; row < a.rows(); ++row) {
            os << "A," << i << ',' << (row + 1);
            for (Eigen::Index col = 0; col < a.cols(); ++col) os << ',' << format_double(a(row, col));
            os << '\n';
        }
        os << "b," << i;
        for (Eigen::Index row = 0; row < a.rows(); ++row) os << ',' << format_double(p.measurements(i)(row));
        os << '\n';
    }
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}
}  // namespace detail

inline LeastSquaresProblem read_problem(std::istream& is) {
    auto fail = [](const std::string& why) -> LeastSquaresProblem { throw ArgumentError("read_problem: " + why); };
    std::string line;
    if (!std::getline(is, line) || line != "ceca-least-squares,1") return fail("missing header");
    if (!std::getline(is, line)) return fail("missing size header");
    if (!std::getline(is, line)) return fail("missing sizes");
    const auto sizes = detail::split_csv_line(line);
    if (sizes.size() != 6) return fail("bad sizes line");
    const int n = std::stoi(sizes[0]);
    const int big_n = std::stoi(sizes[1]);
    const int d = std::stoi(sizes[2]);
    if (n < 1 || big_n < 1 || d < 1) return fail("bad sizes");
    LeastSquaresProblem p;
    p.sigma_s = std::stod(sizes[3]);
    p.sigma_n = std::stod(sizes[4]);
    p.seed = std::stoull(sizes[5]);
    p.A.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(big_n, d));
    p.b.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(big_n));
    p.x_star_gen = Eigen::VectorXd::Zero(d);
    bool have_x = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells[0] == "x_star_gen") {
            if (cells.size() != static_cast<std::size_t>(d) + 1) return fail("bad x_star_gen line");
            for (int j = 0; j < d; ++j) p.x_star_gen(j) = std::stod(cells[static_cast<std::size_t>(j) + 1]);
            have_x = true;
        } else if (cells[0] == "A") {
            if (cells.size() != static_cast<std::size_t>(d) + 3) return fail("bad A line");
            const int i = std::stoi(cells[1]);
            const int row = std::stoi(cells[2]);
            if (i < 1 || i > n || row < 1 || row > big_n) return fail("A index out of range");
            for (int j = 0; j < d; ++j) p.A[static_cast<std::size_t>(i - 1)](row - 1, j) = std::stod(cells[static_cast<std::size_t>(j) + 3]);
        } else if (cells[0] == "b") {
            if (cells.size() != static_cast<std::size_t>(big_n) + 2) return fail("bad b line");
            const int i = std::stoi(cells[1]);
            if (i < 1 || i > n) return fail("b index out of range");
            for (int row = 0; row < big_n; ++row) p.b[static_cast<std::size_t>(i - 1)](row) = std::stod(cells[static_cast<std::size_t>(row) + 2]);
        } else {
            return fail("unknown record '" + cells[0] + "'");
        }
    }
    if (!have_x) return fail("missing x_star_gen");
    return p;
}

}  // namespace ceca
