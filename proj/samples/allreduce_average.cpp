// Averages one scalar per agent with CECA gossip and prints the state after every round.
//
//   sample_allreduce            # n = 6, values 1..6, two-port
//   sample_allreduce 10 1p      # n = 10, values 1..10, one-port

#include <cstdlib>
#include <iostream>
#include <string>

#include "ceca/ceca.hpp"

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 6;
    const ceca::PortModel mode = ceca::parse_port_model(argc > 2 ? argv[2] : "2p");

    Eigen::MatrixXd u(n, 1);
    for (int i = 0; i < n; ++i) u(i, 0) = i + 1;

    const ceca::BinarySchedule schedule(n);
    std::cout << "n = " << n << ", tau = " << schedule.rounds() << ", mode = " << ceca::to_string(mode) << '\n';

    const auto result = ceca::run_consensus(u, mode, [](const ceca::ConsensusState& s) {
        std::cout << "round " << s.round << "  I:";
        for (Eigen::Index i = 0; i < s.I.rows(); ++i) std::cout << ' ' << s.I(i, 0);
        std::cout << '\n';
    });

    std::cout << "exact mean " << u.mean() << ", agent 1 holds " << result.averages(0, 0) << " after "
              << result.rounds_used << " rounds\n";
    return 0;
}
