#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ceca/rng.hpp"

using ceca::CounterStream;
using ceca::Philox4x32;
using ceca::StreamTag;

// Published Philox4x32-10 known-answer vectors.
TEST(Philox, KnownAnswerZero) {
    constexpr auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerAllOnes) {
    const auto out = Philox4x32::apply({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPi) {
    const auto out = Philox4x32::apply({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterStream, DrawsArePureFunctionsOfKeyAndIndex) {
    CounterStream a(42, StreamTag::gradient_noise, 3, 7);
    const CounterStream b(42, StreamTag::gradient_noise, 3, 7);
    for (std::uint64_t j = 0; j < 16; ++j) {
        EXPECT_EQ(a.next_normal(), b.normal(j));
    }
    EXPECT_EQ(b.uniform(5), b.uniform(5));
}

TEST(CounterStream, DifferentKeysGiveDifferentStreams) {
    std::set<double> firsts;
    for (std::uint32_t agent = 1; agent <= 4; ++agent) {
        for (std::uint32_t it = 0; it < 4; ++it) {
            firsts.insert(CounterStream(1, StreamTag::gradient_noise, agent, it).uniform(0));
        }
    }
    firsts.insert(CounterStream(2, StreamTag::gradient_noise, 1, 0).uniform(0));
    firsts.insert(CounterStream(1, StreamTag::initial_models, 1, 0).uniform(0));
    EXPECT_EQ(firsts.size(), 18u);
}

TEST(CounterStream, UniformRangeAndNormalMoments) {
    const CounterStream s(9, StreamTag::design_matrix, 1, 0);
    constexpr int kDraws = 200000;
    double mean = 0.0, sq = 0.0;
    for (int j = 0; j < kDraws; ++j) {
        const double u = s.uniform(static_cast<std::uint64_t>(j));
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double z = s.normal(static_cast<std::uint64_t>(j));
        ASSERT_TRUE(std::isfinite(z));
        mean += z;
        sq += z * z;
    }
    mean /= kDraws;
    const double var = sq / kDraws - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(kDraws));
    EXPECT_NEAR(var, 1.0, 0.02);
}
