#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ceca/error.hpp"

namespace ceca {

/// 1-based modular agent index: returns l in [1, n] with i = l (mod n).
/// Multiples of n map to n, never to 0.
constexpr std::int64_t mod_index(std::int64_t i, std::int64_t n) {
    if (n < 1) throw ArgumentError("mod_index: n must be >= 1");
    const std::int64_t r = ((i % n) + n) % n;
    return r == 0 ? n : r;
}

/// Round plan derived from the binary expansion of n - 1.
///
/// delta holds the bits of n - 1 most significant first, so delta[0] == 1.
/// windows[r] is the number of previous agents already folded into an agent's
/// running average before round r: windows[0] = 0, windows[r+1] = 2 windows[r] + delta[r],
/// and windows[rounds()] = n - 1.
class BinarySchedule {
public:
    explicit BinarySchedule(int n) : n_(n) {
        if (n < 2) {
            throw ArgumentError("BinarySchedule: agent count must be >= 2, got " + std::to_string(n));
        }
        const auto m = static_cast<std::uint64_t>(n - 1);
        tau_ = static_cast<int>(std::bit_width(m));
        delta_.reserve(tau_);
        for (int r = 0; r < tau_; ++r) {
            delta_.push_back(static_cast<int>((m >> (tau_ - 1 - r)) & 1U));
        }
        windows_.reserve(tau_ + 1);
        windows_.push_back(0);
        for (int r = 0; r < tau_; ++r) windows_.push_back(2 * windows_.back() + delta_[r]);
    }

    int agents() const noexcept { return n_; }
    /// Number of rounds, ceil(log2 n).
    int rounds() const noexcept { return tau_; }

    int delta(int r) const {
        check_round(r);
        return delta_[static_cast<std::size_t>(r)];
    }
    /// n_r for r in [0, rounds()].
    int window(int r) const {
        if (r < 0 || r > tau_) throw ArgumentError("BinarySchedule::window: r out of range");
        return windows_[static_cast<std::size_t>(r)];
    }

    std::span<const int> deltas() const noexcept { return delta_; }
    std::span<const int> windows() const noexcept { return windows_; }

    /// Round used at optimizer iteration k (plain residue, r = 0 at k = 0).
    int round_at(std::int64_t k) const {
        if (k < 0) throw ArgumentError("BinarySchedule::round_at: negative iteration");
        return static_cast<int>(k % tau_);
    }

    void check_round(int r) const {
        if (r < 0 || r >= tau_) {
            throw ArgumentError("round " + std::to_string(r) + " outside [0, " + std::to_string(tau_) + ")");
        }
    }

private:
    int n_;
    int tau_ = 0;
    std::vector<int> delta_;
    std::vector<int> windows_;
};

inline BinarySchedule build_schedule(int n) { return BinarySchedule(n); }

/// Self weight a (for the I / x variable) and b (for the J / y variable) of one round.
/// The partner's exchanged value gets 1 - a and 1 - b respectively.
struct StepCoefficients {
    double a = 0.0;
    double b = 0.0;
    int delta_r = 0;
    int r = 0;
};

inline StepCoefficients step_coefficients(const BinarySchedule& schedule, int r) {
    const int delta = schedule.delta(r);
    const double nr = schedule.window(r);
    const double denom = 2.0 * nr + 1.0;
    if (delta == 1) return {0.5, nr / denom, 1, r};
    return {(nr + 1.0) / denom, 0.5, 0, r};
}

}  // namespace ceca
