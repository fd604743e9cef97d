#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "ceca/consensus.hpp"
#include "oracles.hpp"

using ceca::BinarySchedule;
using ceca::PortModel;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

Eigen::MatrixXd one_to_six() { return column({1, 2, 3, 4, 5, 6}); }

Eigen::MatrixXd random_inputs(int n, int d, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd u(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) u(i, j) = dist(gen);
    return u;
}

// Rows of the worked n = 6 table: (I_1, J_1, ..., I_6, J_6) after each round.
using Row = std::array<double, 12>;

void expect_row(const ceca::ConsensusState& s, const Row& row) {
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(s.I(i, 0), row[2 * i], 1e-12) << "I_" << i + 1 << " round " << s.round;
        EXPECT_NEAR(s.J(i, 0), row[2 * i + 1], 1e-12) << "J_" << i + 1 << " round " << s.round;
    }
}

// Mean of u over agents i - from .. i - to (1-based), or i + from .. i + to when forward.
double window_mean(const Eigen::MatrixXd& u, int i, int from, int to, bool forward, int col) {
    const int n = static_cast<int>(u.rows());
    double sum = 0.0;
    for (int j = from; j <= to; ++j) sum += u(oracle::wrap(forward ? i + j : i - j, n) - 1, col);
    return sum / (to - from + 1);
}

}  // namespace

TEST(InitState, Examples) {
    const auto s = ceca::init_state(one_to_six());
    EXPECT_EQ(s.I, one_to_six());
    EXPECT_TRUE(s.J.isZero(0));
    EXPECT_EQ(s.round, 0);
    const auto c = ceca::init_state(column({2.5, 2.5}));
    EXPECT_EQ(c.I, column({2.5, 2.5}));
    EXPECT_TRUE(c.J.isZero(0));
    EXPECT_THROW(ceca::init_state(Eigen::MatrixXd(0, 1)), ceca::ArgumentError);
}

TEST(GoldenTable, TwoPortSixAgents) {
    const std::vector<Row> table{
        {1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0},
        {3.5, 6, 1.5, 1, 2.5, 2, 3.5, 3, 4.5, 4, 5.5, 5},
        {4, 5.5, 3, 3.5, 2, 1.5, 3, 2.5, 4, 3.5, 5, 4.5},
        {3.5, 4, 3.5, 3.8, 3.5, 3.6, 3.5, 3.4, 3.5, 3.2, 3.5, 3},
    };
    const BinarySchedule schedule(6);
    auto s = ceca::init_state(one_to_six());
    expect_row(s, table[0]);
    for (int r = 0; r < 3; ++r) {
        s = ceca::step_2p(s, schedule);
        expect_row(s, table[static_cast<std::size_t>(r + 1)]);
    }
    EXPECT_THROW(ceca::step_2p(s, schedule), ceca::ArgumentError);
}

TEST(GoldenTable, OnePortSixAgents) {
    const std::vector<Row> table{
        {1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0},
        {1.5, 2, 1.5, 1, 3.5, 4, 3.5, 3, 5.5, 6, 5.5, 5},
        {2, 2.5, 3, 3.5, 4, 4.5, 3, 2.5, 4, 3.5, 5, 4.5},
        {3.5, 4, 3.5, 3.8, 3.5, 3.6, 3.5, 3.4, 3.5, 3.2, 3.5, 3},
    };
    const BinarySchedule schedule(6);
    auto s = ceca::init_state(one_to_six());
    expect_row(s, table[0]);
    for (int r = 0; r < 3; ++r) {
        s = ceca::step_1p(s, schedule);
        expect_row(s, table[static_cast<std::size_t>(r + 1)]);
    }
}

TEST(StepOnePort, RejectsOddN) {
    const BinarySchedule schedule(5);
    EXPECT_THROW(ceca::step_1p(ceca::init_state(random_inputs(5, 1, 1)), schedule), ceca::ModelError);
    EXPECT_THROW(ceca::run_consensus(random_inputs(7, 2, 1), PortModel::one_port), ceca::ModelError);
}

TEST(RunConsensus, Examples) {
    const auto six = ceca::run_consensus(one_to_six(), PortModel::two_port);
    EXPECT_EQ(six.rounds_used, 3);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(six.averages(i, 0), 3.5, 1e-12);

    const auto constant = ceca::run_consensus(Eigen::MatrixXd::Constant(4, 1, -1.25), PortModel::two_port);
    EXPECT_EQ(constant.rounds_used, 2);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(constant.averages(i, 0), -1.25, 1e-15);
}

TEST(RunConsensus, IndicatorOnTenAgentsMatchesOperatorProduct) {
    const int n = 10;
    Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(n, 1);
    e1(0, 0) = 1.0;
    const auto res = ceca::run_consensus(e1, PortModel::two_port);
    EXPECT_EQ(res.rounds_used, 4);

    // Dense round operators on the stacked (I, J) vector.
    const auto deltas = oracle::deltas(n);
    const auto windows = oracle::windows(n);
    Eigen::MatrixXd op = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (int r = 0; r < 4; ++r) {
        const double nr = windows[static_cast<std::size_t>(r)];
        const Eigen::MatrixXd q = oracle::comm(n, r, false);
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        if (deltas[static_cast<std::size_t>(r)] == 1) {
            m.topLeftCorner(n, n) = 0.5 * eye + 0.5 * q;
            m.bottomLeftCorner(n, n) = (nr + 1) / (2 * nr + 1) * q;
            m.bottomRightCorner(n, n) = nr / (2 * nr + 1) * eye;
        } else {
            m.topLeftCorner(n, n) = (nr + 1) / (2 * nr + 1) * eye;
            m.topRightCorner(n, n) = nr / (2 * nr + 1) * q;
            m.bottomRightCorner(n, n) = 0.5 * eye + 0.5 * q;
        }
        op = m * op;
    }
    Eigen::VectorXd start = Eigen::VectorXd::Zero(2 * n);
    start(0) = 1.0;
    const Eigen::VectorXd expected = op * start;
    for (int i = 0; i < n; ++i) {
        EXPECT_NEAR(res.averages(i, 0), 0.1, 1e-14);
        EXPECT_NEAR(res.averages(i, 0), expected(i), 1e-14);
        EXPECT_NEAR(res.leave_one_out(i, 0), expected(n + i), 1e-14);
    }
}

// After each round r the state equals the window averages of the inputs:
// 2-port windows run backward from agent i, 1-port windows run forward for odd i and backward for even i.
TEST(ConsensusProperty, WindowInvariantBothModes) {
    for (int n = 2; n <= 64; ++n) {
        for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
            if (mode == PortModel::one_port && n % 2 != 0) continue;
            const BinarySchedule schedule(n);
            const Eigen::MatrixXd u = random_inputs(n, 2, static_cast<unsigned>(n));
            auto s = ceca::init_state(u);
            for (int r = 1; r <= schedule.rounds(); ++r) {
                s = ceca::step(s, schedule, mode);
                const int nr = schedule.window(r);
                for (int i = 1; i <= n; ++i) {
                    const bool forward = mode == PortModel::one_port && i % 2 == 1;
                    for (int c = 0; c < 2; ++c) {
                        const double want_i = window_mean(u, i, 0, nr, forward, c);
                        const double want_j = window_mean(u, i, 1, nr, forward, c);
                        ASSERT_NEAR(s.I(i - 1, c), want_i, 1e-12 * (1.0 + std::abs(want_i)))
                            << "n=" << n << " mode=" << ceca::to_string(mode) << " r=" << r << " i=" << i;
                        ASSERT_NEAR(s.J(i - 1, c), want_j, 1e-12 * (1.0 + std::abs(want_j)))
                            << "n=" << n << " mode=" << ceca::to_string(mode) << " r=" << r << " i=" << i;
                    }
                }
            }
        }
    }
}

// Consensus is reached at round tau and not one round earlier; J ends at the leave-one-out average.
TEST(ConsensusProperty, OptimalityWitnessAndLeaveOneOut) {
    for (int n = 2; n <= 64; ++n) {
        for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
            if (mode == PortModel::one_port && n % 2 != 0) continue;
            const Eigen::MatrixXd u = random_inputs(n, 3, 1000u + static_cast<unsigned>(n));
            const Eigen::RowVectorXd mean = u.colwise().mean();
            const double scale = u.cwiseAbs().maxCoeff();
            std::vector<ceca::ConsensusState> states;
            const auto res = ceca::run_consensus(u, mode, [&](const ceca::ConsensusState& s) { states.push_back(s); });
            const int tau = BinarySchedule(n).rounds();
            ASSERT_EQ(res.rounds_used, tau);
            const double final_dev = (res.averages.rowwise() - mean).cwiseAbs().maxCoeff() / scale;
            ASSERT_LE(final_dev, 1e-10) << "n=" << n;
            const double early_dev = (states[static_cast<std::size_t>(tau - 1)].I.rowwise() - mean).cwiseAbs().maxCoeff();
            ASSERT_GT(early_dev, 1e-6) << "n=" << n;
            for (int i = 0; i < n; ++i) {
                const Eigen::RowVectorXd loo = (u.colwise().sum() - u.row(i)) / (n - 1);
                ASSERT_LE((res.leave_one_out.row(i) - loo).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + scale))
                    << "n=" << n << " mode=" << ceca::to_string(mode) << " i=" << i + 1;
            }
        }
    }
}

TEST(ConsensusProperty, Linearity) {
    for (int n : {3, 6, 9, 16, 33}) {
        for (PortModel mode : {PortModel::two_port, PortModel::one_port}) {
            if (mode == PortModel::one_port && n % 2 != 0) continue;
            const Eigen::MatrixXd u = random_inputs(n, 2, 7);
            const Eigen::MatrixXd v = random_inputs(n, 2, 8);
            const double alpha = 1.7, beta = -0.3;
            const auto lhs = ceca::run_consensus(alpha * u + beta * v, mode);
            const auto ru = ceca::run_consensus(u, mode);
            const auto rv = ceca::run_consensus(v, mode);
            EXPECT_LE((lhs.averages - (alpha * ru.averages + beta * rv.averages)).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LE((lhs.leave_one_out - (alpha * ru.leave_one_out + beta * rv.leave_one_out)).cwiseAbs().maxCoeff(),
                      1e-12);
        }
    }
}

TEST(ConsensusCsv, TraceFormat) {
    std::ostringstream os;
    ceca::write_state_csv_header(os);
    ceca::run_consensus(column({1, 2}), PortModel::two_port,
                        [&](const ceca::ConsensusState& s) { ceca::write_state_csv(os, s); });
    EXPECT_EQ(os.str(), "round,agent,coord,I,J\n0,1,0,1,0\n0,2,0,2,0\n1,1,0,1.5,2\n1,2,0,1.5,1\n");
}
