#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ceca/error.hpp"
#include "ceca/schedule.hpp"

namespace ceca {

enum class PortModel { one_port, two_port };

inline std::string_view to_string(PortModel mode) {
    return mode == PortModel::one_port ? "1p" : "2p";
}

inline PortModel parse_port_model(std::string_view text) {
    if (text == "1p" || text == "one-port" || text == "1") return PortModel::one_port;
    if (text == "2p" || text == "two-port" || text == "2") return PortModel::two_port;
    throw ConfigError("unknown port model '" + std::string(text) + "' (expected 1p or 2p)");
}

/// One round's message flow as a permutation: Q(i, j) = 1 iff agent j sends to agent i.
///
/// Stored as a neighbor list (the sending agent of each receiver) so applying a round
/// is O(n); dense() materializes the 0/1 matrix for the linear-algebra checks.
/// Construction validates the invariants of the port model and throws TopologyError
/// with the offending agents on any violation.
class CommMatrix {
public:
    /// sources[i] is the 0-based sender of 0-based receiver i.
    CommMatrix(PortModel mode, int round, std::vector<int> sources)
        : mode_(mode), round_(round), sources_(std::move(sources)) {
        validate();
    }

    int size() const noexcept { return static_cast<int>(sources_.size()); }
    PortModel mode() const noexcept { return mode_; }
    int round() const noexcept { return round_; }

    /// 1-based sender of 1-based agent i.
    int receive_from(int i) const { return sources_[index(i)] + 1; }

    /// 1-based receiver of 1-based agent j's message.
    int send_to(int j) const {
        const auto k = index(j);
        for (std::size_t i = 0; i < sources_.size(); ++i) {
            if (static_cast<std::size_t>(sources_[i]) == k) return static_cast<int>(i) + 1;
        }
        throw TopologyError("send_to: no receiver");  // unreachable after validate()
    }

    /// 1-based entry access.
    bool entry(int i, int j) const { return sources_[index(i)] + 1 == j; }

    /// 0-based storage view; not part of any serialized output.
    std::span<const int> sources() const noexcept { return sources_; }

    Eigen::MatrixXd dense() const {
        const int n = size();
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) q(i, sources_[static_cast<std::size_t>(i)]) = 1.0;
        return q;
    }

    /// Row i of the result is row receive_from(i) of z, i.e. Q z.
    Eigen::MatrixXd gather(const Eigen::MatrixXd& z) const {
        if (z.rows() != size()) throw ArgumentError("CommMatrix::gather: row count mismatch");
        Eigen::MatrixXd out(z.rows(), z.cols());
        for (int i = 0; i < size(); ++i) out.row(i) = z.row(sources_[static_cast<std::size_t>(i)]);
        return out;
    }

    /// Dense 0/1 grid, one CSV line per row.
    void write_csv(std::ostream& os) const {
        const int n = size();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j) os << ',';
                os << (sources_[static_cast<std::size_t>(i)] == j ? '1' : '0');
            }
            os << '\n';
        }
    }

private:
    std::size_t index(int agent) const {
        if (agent < 1 || agent > size()) {
            throw ArgumentError("agent index " + std::to_string(agent) + " outside [1, " + std::to_string(size()) + "]");
        }
        return static_cast<std::size_t>(agent - 1);
    }

    void validate() const {
        const int n = size();
        if (n < 2) throw TopologyError("communication matrix needs at least 2 agents");
        std::vector<int> hits(static_cast<std::size_t>(n), 0);
        for (int s : sources_) {
            if (s < 0 || s >= n) throw TopologyError("sender index out of range: " + std::to_string(s + 1));
            ++hits[static_cast<std::size_t>(s)];
        }
        for (int j = 0; j < n; ++j) {
            if (hits[static_cast<std::size_t>(j)] != 1) {
                throw TopologyError("round " + std::to_string(round_) + ": agent " + std::to_string(j + 1) +
                                    " sends " + std::to_string(hits[static_cast<std::size_t>(j)]) +
                                    " messages (not a permutation)");
            }
        }
        if (mode_ == PortModel::one_port) {
            for (int i = 0; i < n; ++i) {
                const int p = sources_[static_cast<std::size_t>(i)];
                if (p == i || sources_[static_cast<std::size_t>(p)] != i) {
                    throw TopologyError("round " + std::to_string(round_) + ": pairing is not a perfect matching at agent " +
                                        std::to_string(i + 1) + " (partner " + std::to_string(p + 1) + ")");
                }
            }
        } else {
            const int shift = ((0 - sources_[0]) % n + n) % n;
            for (int i = 0; i < n; ++i) {
                if (((i - sources_[static_cast<std::size_t>(i)]) % n + n) % n != shift) {
                    throw TopologyError("round " + std::to_string(round_) + ": 2-port matrix is not a cyclic shift at agent " +
                                        std::to_string(i + 1));
                }
            }
        }
    }

    PortModel mode_;
    int round_;
    std::vector<int> sources_;
};

/// 2-port round r: agent i receives from i - s with s = n_r + 1 (delta_r = 1) or s = n_r (delta_r = 0).
inline CommMatrix comm_matrix_2p(const BinarySchedule& schedule, int r) {
    schedule.check_round(r);
    const int n = schedule.agents();
    const int shift = schedule.window(r) + schedule.delta(r);
    std::vector<int> sources(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) sources[static_cast<std::size_t>(i - 1)] = static_cast<int>(mod_index(i - shift, n)) - 1;
    return CommMatrix(PortModel::two_port, r, std::move(sources));
}

/// 1-port round r: odd i pairs with i + 2 n_r + 1, even i with i - 2 n_r - 1. Requires even n.
inline CommMatrix comm_matrix_1p(const BinarySchedule& schedule, int r) {
    const int n = schedule.agents();
    if (n % 2 != 0) {
        throw ModelError("1-port model requires an even agent count, got n = " + std::to_string(n));
    }
    schedule.check_round(r);
    const int step = 2 * schedule.window(r) + 1;
    std::vector<int> sources(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const std::int64_t partner = (i % 2 == 1) ? mod_index(i + step, n) : mod_index(i - step, n);
        sources[static_cast<std::size_t>(i - 1)] = static_cast<int>(partner) - 1;
    }
    return CommMatrix(PortModel::one_port, r, std::move(sources));
}

inline CommMatrix comm_matrix(const BinarySchedule& schedule, int r, PortModel mode) {
    return mode == PortModel::one_port ? comm_matrix_1p(schedule, r) : comm_matrix_2p(schedule, r);
}

inline int receive_from(const CommMatrix& matrix, int i) { return matrix.receive_from(i); }

}  // namespace ceca
