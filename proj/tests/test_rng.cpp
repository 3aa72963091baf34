#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "seqmv/parallel.hpp"
#include "seqmv/rng.hpp"

using namespace seqmv;

// Known-answer vectors for Philox4x32-10 published with Random123.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RandomStream, ReplayIsBitExact) {
  const RngContract rng{42};
  RandomStream a = rng.stream(3, 17, StreamTag::Brownian);
  RandomStream b = rng.stream(3, 17, StreamTag::Brownian);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(RandomStream, AddressesGiveDistinctStreams) {
  const RngContract rng{42};
  std::set<double> first;
  for (std::uint64_t r = 0; r < 4; ++r)
    for (std::uint64_t p = 0; p < 4; ++p)
      for (auto tag : {StreamTag::Init, StreamTag::Brownian, StreamTag::EvalInit}) {
        first.insert(rng.stream(r, p, tag).uniform());
      }
  EXPECT_EQ(first.size(), 4u * 4u * 3u);
  EXPECT_NE(RngContract{1}.stream(0, 1, StreamTag::Init).uniform(), RngContract{2}.stream(0, 1, StreamTag::Init).uniform());
}

TEST(RandomStream, UniformsInOpenUnitInterval) {
  RandomStream s = RngContract{7}.stream(0, 0, StreamTag::Synthetic);
  for (int k = 0; k < 100000; ++k) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RandomStream, NormalMoments) {
  RandomStream s = RngContract{11}.stream(0, 0, StreamTag::Synthetic);
  const std::size_t n = 200000;
  std::vector<double> x(n), x2(n), x4(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = s.normal();
    x2[k] = x[k] * x[k];
    x4[k] = x2[k] * x2[k];
  }
  const MeanSe m1 = mean_and_se(x);
  const MeanSe m2 = mean_and_se(x2);
  const MeanSe m4 = mean_and_se(x4);
  EXPECT_LT(std::abs(m1.mean), 4.0 * m1.std_err);
  EXPECT_LT(std::abs(m2.mean - 1.0), 4.0 * m2.std_err);
  EXPECT_LT(std::abs(m4.mean - 3.0), 4.0 * m4.std_err);
}

TEST(RandomStream, BlocksAdvanceTwoUniformsAtATime) {
  RandomStream s = RngContract{5}.stream(0, 0, StreamTag::Synthetic);
  EXPECT_EQ(s.blocks_consumed(), 0u);
  s.uniform();
  EXPECT_EQ(s.blocks_consumed(), 1u);
  s.uniform();
  EXPECT_EQ(s.blocks_consumed(), 1u);
  s.normal();  // two uniforms, one block
  EXPECT_EQ(s.blocks_consumed(), 2u);
  s.normal();  // cached spare
  EXPECT_EQ(s.blocks_consumed(), 2u);
}

TEST(RngContract, DeriveIsDeterministicAndDistinct) {
  const RngContract rng{123};
  EXPECT_EQ(rng.derive(1).master_seed, rng.derive(1).master_seed);
  EXPECT_NE(rng.derive(1).master_seed, rng.derive(2).master_seed);
  EXPECT_NE(rng.derive(0).master_seed, rng.master_seed);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  const std::size_t n = 64;
  const auto run = [&](unsigned threads) {
    std::vector<double> out(n);
    parallel_for(n, threads, [&](std::size_t r) {
      RandomStream s = RngContract{9}.stream(r, 0, StreamTag::Synthetic);
      double acc = 0.0;
      for (int k = 0; k < 100; ++k) acc += s.normal();
      out[r] = acc;
    });
    return out;
  };
  const auto one = run(1);
  const auto four = run(4);
  EXPECT_EQ(one, four);
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t r) {
                              if (r == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, PairwiseSumMatchesExactSmallIntegers) {
  std::vector<double> v(1001);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
  EXPECT_EQ(pairwise_sum(v), 1000.0 * 1001.0 / 2.0);
  EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(Parallel, MeanAndStandardError) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const MeanSe m = mean_and_se(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  // sample variance 5/3, se = sqrt(5/3 / 4)
  EXPECT_NEAR(m.std_err, std::sqrt(5.0 / 12.0), 1e-15);
}
