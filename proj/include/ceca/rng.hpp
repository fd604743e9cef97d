#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ceca {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: same (counter, key)
/// always yields the same 128 output bits.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Purpose tags so independent quantities drawn under one seed never share counters.
enum class StreamTag : std::uint32_t {
    gradient_noise = 1,
    initial_models = 2,
    design_matrix = 3,
    measurement_noise = 4,
    generator_solution = 5,
    consensus_input = 6,
};

/// Counter-based stream keyed by (seed, tag, agent, iteration).
///
/// Draw j of a stream is a pure function of the key and j, so results do not
/// depend on evaluation order or thread count. Sequential draws via next_*()
/// walk j = 0, 1, 2, ...
class CounterStream {
public:
    CounterStream(std::uint64_t seed, StreamTag tag, std::uint32_t agent, std::uint32_t iteration) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          agent_(agent),
          iteration_(iteration),
          tag_(static_cast<std::uint32_t>(tag)) {}

    /// Uniform in [0, 1) at draw index j.
    double uniform(std::uint64_t j) const noexcept {
        const auto block = bits(j / 2);
        const std::size_t off = (j % 2) * 2;
        return to_unit(block[off], block[off + 1]);
    }

    /// Standard normal at draw index j (Box-Muller over one Philox block per pair).
    double normal(std::uint64_t j) const noexcept {
        const auto block = bits(j / 2);
        // u1 in (0, 1] keeps log finite.
        const double u1 = 1.0 - to_unit(block[0], block[1]);
        const double u2 = to_unit(block[2], block[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return (j % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
    }

    double next_uniform() noexcept { return uniform(cursor_++); }
    double next_normal() noexcept { return normal(cursor_++); }

private:
    Philox4x32::Counter bits(std::uint64_t block) const noexcept {
        return Philox4x32::apply({static_cast<std::uint32_t>(block), iteration_, agent_, tag_}, key_);
    }

    static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
        const std::uint64_t word = (std::uint64_t{hi} << 32) | lo;
        return static_cast<double>(word >> 11) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint32_t agent_;
    std::uint32_t iteration_;
    std::uint32_t tag_;
    std::uint64_t cursor_ = 0;
};

}  // namespace ceca
