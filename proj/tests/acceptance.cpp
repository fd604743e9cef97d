// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ceca/ceca.hpp"
#include "oracles.hpp"

using ceca::BinarySchedule;
using ceca::PortModel;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd random_inputs(int n, int d, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> dist(-1e3, 1e3);
    Eigen::MatrixXd u(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) u(i, j) = dist(gen);
    return u;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1. Exact consensus at round tau and not at tau - 1.
Outcome finite_time_consensus() {
    std::mt19937_64 gen(20240601);
    double worst_final = 0.0;
    double weakest_early = std::numeric_limits<double>::infinity();
    int cases = 0;
    for (int n = 2; n <= 64; ++n) {
        for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
            if (mode == PortModel::one_port && n % 2 != 0) continue;
            const Eigen::MatrixXd u = random_inputs(n, 1, gen);
            const double mean = u.mean();
            const double scale = u.cwiseAbs().maxCoeff();
            std::vector<Eigen::MatrixXd> history;
            ceca::run_consensus(u, mode, [&](const ceca::ConsensusState& s) { history.push_back(s.I); });
            const int tau = BinarySchedule(n).rounds();
            worst_final = std::max(worst_final, (history[static_cast<std::size_t>(tau)].array() - mean).abs().maxCoeff() / scale);
            weakest_early = std::min(weakest_early, (history[static_cast<std::size_t>(tau - 1)].array() - mean).abs().maxCoeff());
            ++cases;
        }
    }
    const bool ok = worst_final <= 1e-10 && weakest_early > 1e-6;
    return {ok, std::to_string(cases) + " cases, worst relative deviation at tau " + fmt("%.3e", worst_final) +
                    ", smallest deviation at tau-1 " + fmt("%.3e", weakest_early)};
}

// 2. The n = 6 worked table for both port models.
Outcome golden_table() {
    using Row = std::array<double, 12>;
    const std::array<Row, 4> two_port{{
        {1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0},
        {3.5, 6, 1.5, 1, 2.5, 2, 3.5, 3, 4.5, 4, 5.5, 5},
        {4, 5.5, 3, 3.5, 2, 1.5, 3, 2.5, 4, 3.5, 5, 4.5},
        {3.5, 4, 3.5, 3.8, 3.5, 3.6, 3.5, 3.4, 3.5, 3.2, 3.5, 3},
    }};
    const std::array<Row, 4> one_port{{
        {1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0},
        {1.5, 2, 1.5, 1, 3.5, 4, 3.5, 3, 5.5, 6, 5.5, 5},
        {2, 2.5, 3, 3.5, 4, 4.5, 3, 2.5, 4, 3.5, 5, 4.5},
        {3.5, 4, 3.5, 3.8, 3.5, 3.6, 3.5, 3.4, 3.5, 3.2, 3.5, 3},
    }};
    Eigen::MatrixXd u(6, 1);
    u << 1, 2, 3, 4, 5, 6;
    double worst = 0.0;
    for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
        const auto& table = mode == PortModel::two_port ? two_port : one_port;
        ceca::run_consensus(u, mode, [&](const ceca::ConsensusState& s) {
            const Row& row = table[static_cast<std::size_t>(s.round)];
            for (int i = 0; i < 6; ++i) {
                worst = std::max({worst, std::abs(s.I(i, 0) - row[2 * i]), std::abs(s.J(i, 0) - row[2 * i + 1])});
            }
        });
    }
    return {worst <= 1e-12, "max abs error " + fmt("%.3e", worst)};
}

// 3. Family, norm, product-consensus, semigroup and commutation checks.
Outcome matrix_lemmas() {
    ceca::RunConfig cfg;
    cfg.experiment = ceca::Experiment::matrix_verify;
    cfg.sizes = {2, 3, 5, 6, 10, 17, 32};
    const auto report = ceca::run_matrix_verification(cfg);
    int checked = 0;
    double norm_margin = -std::numeric_limits<double>::infinity();
    double product_err = 0.0;
    std::string first_failure;
    for (const auto& row : report.rows) {
        if (row.status == ceca::CheckStatus::skipped) continue;
        ++checked;
        if (row.check == "norm") norm_margin = std::max(norm_margin, row.worst);
        if (row.check.rfind("consensus", 0) == 0) product_err = std::max(product_err, row.worst);
        if (row.status == ceca::CheckStatus::fail && first_failure.empty()) {
            first_failure = " first failure n=" + std::to_string(row.n) + " " + std::string(ceca::to_string(row.mode)) +
                            " " + row.check;
        }
    }
    return {report.all_passed(), std::to_string(checked) + " checks, max ||.|| - sqrt2 " + fmt("%.3e", norm_margin) +
                                     ", product error " + fmt("%.3e", product_err) + first_failure};
}

// 4. Per-agent recursion equals the stacked matrix form over 2 tau steps.
Outcome stacked_form() {
    const int n = 6, d = 3;
    const BinarySchedule schedule(n);
    const ceca::DsgdCeca method(schedule, PortModel::two_port, 2024);
    std::mt19937_64 gen(99);
    auto state = ceca::make_optimizer_state(random_inputs(n, d, gen) / 100.0, 0.05);
    auto oracle = [](const Eigen::VectorXd& p, int agent, ceca::CounterStream& rng) -> Eigen::VectorXd {
        Eigen::VectorXd g = 0.5 * agent * p;
        for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += rng.next_normal();
        return g;
    };
    double worst = 0.0;
    for (int k = 0; k < 2 * schedule.rounds(); ++k) {
        ceca::StepTrace trace;
        const auto next = method.step(state, oracle, &trace);
        const auto mix = ceca::build_mixing(schedule, schedule.round_at(k), PortModel::two_port);
        Eigen::MatrixXd xy(2 * n, d), ee(2 * n, d), out(2 * n, d);
        xy << state.x, state.y;
        ee << trace.gradients, trace.gradients;
        out << next.x, next.y;
        worst = std::max(worst, (out - (mix.W * xy - state.gamma * mix.Wg * ee)).cwiseAbs().maxCoeff());
        state = next;
    }
    return {worst <= 1e-12, "max abs difference " + fmt("%.3e", worst)};
}

// 5. Averaged iterates follow centralized SGD exactly on the desk problem.
Outcome averaged_trajectory() {
    ceca::RunConfig cfg;
    ceca::apply_preset(cfg, "desk");
    cfg.experiment = ceca::Experiment::lsq;
    cfg.T = 1000;
    const auto res = ceca::run_lsq_experiment(cfg);
    const auto& run = res.runs.front();
    const bool ok = cfg.n == 16 && run.max_mean_gap <= 1e-10 && run.max_mean_step_error <= 1e-10;
    return {ok, "n=" + std::to_string(cfg.n) + ", T=" + std::to_string(cfg.T) + ", max |xbar - ybar| " +
                    fmt("%.3e", run.max_mean_gap) + ", max step error " + fmt("%.3e", run.max_mean_step_error)};
}

// 6. DSGD-CECA-2P ends no farther from the optimum than ring DSGD.
Outcome least_squares_ordering() {
    ceca::RunConfig cfg;
    ceca::apply_preset(cfg, "paper");
    cfg.experiment = ceca::Experiment::lsq;
    cfg.seeds = 5;
    cfg.topology = ceca::Topology::ceca;
    cfg.mode = PortModel::two_port;
    const double ceca_final = ceca::run_lsq_experiment(cfg).mean.back().residue;
    cfg.topology = ceca::Topology::ring;
    const double ring_final = ceca::run_lsq_experiment(cfg).mean.back().residue;
    return {ceca_final <= ring_final, "T=" + std::to_string(cfg.T) + ", final residue ceca-2p " +
                                          fmt("%.6g", ceca_final) + " vs ring " + fmt("%.6g", ring_final)};
}

// 7. Rate helpers agree with the arithmetic oracle; first bound term dominates at T = n^3 tau^4.
Outcome rate_and_bound() {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    double worst_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const ceca::RateParams p{u(gen), u(gen), u(gen), u(gen), std::floor(u(gen) * 1000.0)};
        const int n = 2 + static_cast<int>(u(gen) * 50);
        const int tau = BinarySchedule(n).rounds();
        const double rate = oracle::rate(p.delta, p.L, p.sigma2, p.b2, p.T, n, tau);
        const auto terms = oracle::rhs_terms(p.delta, p.L, p.sigma2, p.b2, p.T, n, tau);
        const double bound = terms[0] + terms[1] + terms[2];
        worst_rel = std::max({worst_rel, std::abs(ceca::theorem_rate(p, n, tau) - rate) / rate,
                              std::abs(ceca::right_hand_side_bound(p, n, tau) - bound) / bound});
    }
    bool dominates = true;
    std::string ratios;
    for (int n : {4, 8, 16}) {
        const int tau = BinarySchedule(n).rounds();
        const double T = std::pow(n, 3) * std::pow(tau, 4);
        const auto t = ceca::right_hand_side_terms({1.0, 1.0, 1.0, 0.0, T}, n, tau);
        const double ratio = std::max(t.transient, t.deterministic) / t.speedup;
        dominates = dominates && t.speedup > t.transient && t.speedup > t.deterministic;
        ratios += " n=" + std::to_string(n) + ":" + fmt("%.3f", ratio);
    }
    return {worst_rel <= 1e-12 && dominates,
            "oracle rel error " + fmt("%.3e", worst_rel) + ", max(other terms)/first term" + ratios};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 finite-time exact consensus", finite_time_consensus},
        {"2 golden n=6 table", golden_table},
        {"3 matrix lemma suite", matrix_lemmas},
        {"4 stacked-form equivalence", stacked_form},
        {"5 averaged-trajectory exactness", averaged_trajectory},
        {"6 least-squares ordering", least_squares_ordering},
        {"7 rate/bound oracles and first-term dominance", rate_and_bound},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!out.pass) ++failures;
        std::printf("%s  %-46s %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
