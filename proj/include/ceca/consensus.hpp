#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <string>

#include "ceca/csv.hpp"
#include "ceca/error.hpp"
#include "ceca/schedule.hpp"
#include "ceca/topology.hpp"

namespace ceca {

/// Per-agent CECA variables. Row i of I and J belongs to agent i + 1.
///
/// I holds the running average over the agent and its window of n_r neighbors,
/// J the same window without the agent itself.
struct ConsensusState {
    Eigen::MatrixXd I;
    Eigen::MatrixXd J;
    int round = 0;

    int agents() const noexcept { return static_cast<int>(I.rows()); }
    int dim() const noexcept { return static_cast<int>(I.cols()); }
};

/// u has one row per agent.
inline ConsensusState init_state(const Eigen::MatrixXd& u) {
    if (u.rows() == 0 || u.cols() == 0) throw ArgumentError("init_state: empty input");
    if (u.rows() < 2) throw ArgumentError("init_state: consensus needs at least 2 agents");
    return {u, Eigen::MatrixXd::Zero(u.rows(), u.cols()), 0};
}

/// One synchronous round with an explicit round index. Every read uses the
/// pre-round snapshot. Does not check state.round against the schedule, so it can
/// be cycled past tau (the consensus experiments do this).
inline ConsensusState ceca_round(const ConsensusState& state, const BinarySchedule& schedule, const CommMatrix& comm) {
    const int r = comm.round();
    if (state.agents() != schedule.agents() || comm.size() != schedule.agents()) {
        throw ArgumentError("ceca_round: agent count mismatch");
    }
    const StepCoefficients c = step_coefficients(schedule, r);
    // delta_r = 1 exchanges I, delta_r = 0 exchanges J.
    const Eigen::MatrixXd received = comm.gather(c.delta_r == 1 ? state.I : state.J);
    ConsensusState next;
    next.I = c.a * state.I + (1.0 - c.a) * received;
    next.J = c.b * state.J + (1.0 - c.b) * received;
    next.round = state.round + 1;
    return next;
}

inline ConsensusState step(const ConsensusState& state, const BinarySchedule& schedule, PortModel mode) {
    if (state.round < 0 || state.round >= schedule.rounds()) {
        throw ArgumentError("consensus step past the last round (round " + std::to_string(state.round) + ", tau " +
                            std::to_string(schedule.rounds()) + ")");
    }
    return ceca_round(state, schedule, comm_matrix(schedule, state.round, mode));
}

inline ConsensusState step_2p(const ConsensusState& state, const BinarySchedule& schedule) {
    return step(state, schedule, PortModel::two_port);
}

inline ConsensusState step_1p(const ConsensusState& state, const BinarySchedule& schedule) {
    return step(state, schedule, PortModel::one_port);
}

struct ConsensusResult {
    Eigen::MatrixXd averages;
    Eigen::MatrixXd leave_one_out;
    int rounds_used = 0;
};

/// Runs all tau rounds. on_round(state) is called with the initial state and after each round.
template <class Observer>
ConsensusResult run_consensus(const Eigen::MatrixXd& u, PortModel mode, Observer&& on_round) {
    const BinarySchedule schedule(static_cast<int>(u.rows()));
    if (mode == PortModel::one_port && schedule.agents() % 2 != 0) {
        throw ModelError("1-port consensus requires an even agent count, got n = " + std::to_string(schedule.agents()));
    }
    ConsensusState state = init_state(u);
    on_round(state);
    while (state.round < schedule.rounds()) {
        state = step(state, schedule, mode);
        on_round(state);
    }
    return {state.I, state.J, state.round};
}

inline ConsensusResult run_consensus(const Eigen::MatrixXd& u, PortModel mode) {
    return run_consensus(u, mode, [](const ConsensusState&) {});
}

inline void write_state_csv_header(std::ostream& os) { os << "round,agent,coord,I,J\n"; }

/// Appends one line per (agent, coordinate), agents 1-based.
inline void write_state_csv(std::ostream& os, const ConsensusState& state) {
    for (int i = 0; i < state.agents(); ++i) {
        for (int c = 0; c < state.dim(); ++c) {
            os << state.round << ',' << (i + 1) << ',' << c << ',' << format_double(state.I(i, c)) << ','
               << format_double(state.J(i, c)) << '\n';
        }
    }
}

}  // namespace ceca
