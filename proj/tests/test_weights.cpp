#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "seqmv/weights.hpp"

using namespace seqmv;

TEST(Weights, SpecExamples) {
  const auto u = weights_for(WeightScheme::uniform(), 3);
  for (double w : u.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  for (const auto& s : {WeightScheme::uniform(), WeightScheme::power_law(0.5, 1.0), WeightScheme::custom({1.0, 0.3})}) {
    const auto t = weights_for(s, 1);
    ASSERT_EQ(t.weights.size(), 1u);
    EXPECT_EQ(t.weights[0], 1.0);
  }
  const auto p = weights_for(WeightScheme::power_law(0.5, 1.0), 3);
  EXPECT_NEAR(p.weights[2], 0.57735, 5e-6);
  EXPECT_NEAR(p.weights[1], 0.29886, 5e-6);
  EXPECT_NEAR(p.weights[0], 0.12379, 5e-6);
  // hand products
  const double a2 = std::pow(2.0, -0.5);
  const double a3 = std::pow(3.0, -0.5);
  EXPECT_NEAR(p.weights[1], a2 * (1.0 - a3), 1e-15);
  EXPECT_NEAR(p.weights[0], (1.0 - a2) * (1.0 - a3), 1e-15);
  // 0.57735^2 + 0.29886^2 + 0.12379^2 = 0.437974
  const double hand = 0.57735 * 0.57735 + 0.29886 * 0.29886 + 0.12379 * 0.12379;
  EXPECT_NEAR(p.theta, hand, 1e-5);
  EXPECT_NEAR(p.n_eff, 1.0 / hand, 5e-5);
  EXPECT_THROW(weights_for(WeightScheme::uniform(), 0), Error);
}

TEST(Weights, ThetaAndNeff) {
  const auto u = theta_and_neff(WeightScheme::uniform(), 4);
  EXPECT_EQ(u.theta, 0.25);
  EXPECT_EQ(u.n_eff, 4.0);
  const auto one = theta_and_neff(WeightScheme::power_law(0.7, 3.0), 1);
  EXPECT_EQ(one.theta, 1.0);
  EXPECT_EQ(one.n_eff, 1.0);
  for (std::size_t i : {1u, 7u, 100u, 4096u}) EXPECT_EQ(theta_and_neff(WeightScheme::uniform(), i).n_eff, static_cast<double>(i));
}

TEST(Weights, ProbabilityVectors) {
  const std::vector<WeightScheme> schemes{WeightScheme::uniform(), WeightScheme::power_law(0.5, 1.0),
                                          WeightScheme::power_law(1.5, 1.0), WeightScheme::power_law(0.75, 4.0),
                                          WeightScheme::custom({1.0, 0.9, 0.1, 0.5, 1.0, 0.2})};
  for (const auto& s : schemes) {
    const std::size_t top = std::min<std::size_t>(s.max_index(), 10000);
    for (std::size_t i = 1; i <= top; i += (i < 50 ? 1 : 97)) {
      const auto t = weights_for(s, i);
      double sum = 0.0;
      for (double w : t.weights) {
        ASSERT_GE(w, 0.0);
        sum += w;
      }
      ASSERT_NEAR(sum, 1.0, 1e-12) << s.id() << " i=" << i;
      ASSERT_GT(t.theta, 0.0);
      ASSERT_LE(t.theta, 1.0);
      ASSERT_GE(t.n_eff, 1.0);
      ASSERT_EQ(t.weights.back(), s.alpha(i));
    }
  }
}

TEST(Weights, RecursionMatchesExpandedForm) {
  RandomStream rs = RngContract{77}.stream(0, 0, StreamTag::Synthetic);
  const std::vector<WeightScheme> schemes{WeightScheme::power_law(0.5, 1.0), WeightScheme::power_law(1.5, 2.0),
                                          WeightScheme::uniform()};
  for (int set = 0; set < 100; ++set) {
    const auto& s = schemes[set % schemes.size()];
    const std::size_t n = 1 + static_cast<std::size_t>(rs.uniform() * 60);
    std::vector<double> f(n);
    for (double& v : f) v = 4.0 * rs.uniform() - 2.0;
    double mu = 0.0;
    for (std::size_t i = 1; i <= n; ++i) mu = (1.0 - s.alpha(i)) * mu + s.alpha(i) * f[i - 1];
    const auto t = weights_for(s, n);
    double expanded = 0.0;
    for (std::size_t k = 0; k < n; ++k) expanded += t.weights[k] * f[k];
    ASSERT_NEAR(mu, expanded, 1e-12);
  }
}

TEST(Weights, PowerOneIsUniform) {
  const auto p = WeightScheme::power_law(1.0, 1.0);
  for (std::size_t i : {1u, 2u, 3u, 10u, 257u}) {
    EXPECT_NEAR(p.alpha(i), 1.0 / static_cast<double>(i), 1e-15);
    const auto a = weights_for(p, i);
    const auto b = weights_for(WeightScheme::uniform(), i);
    for (std::size_t k = 0; k < i; ++k) EXPECT_NEAR(a.weights[k], b.weights[k], 1e-15);
  }
}

TEST(Weights, SchemeValidation) {
  EXPECT_THROW(WeightScheme::power_law(0.0, 1.0), ConfigError);
  EXPECT_THROW(WeightScheme::power_law(1.0, -1.0), ConfigError);
  EXPECT_THROW(WeightScheme::custom({0.5, 0.5}), ConfigError);
  EXPECT_THROW(WeightScheme::custom({1.0, 0.0}), ConfigError);
  EXPECT_THROW(WeightScheme::custom({1.0, 1.5}), ConfigError);
  const auto big_c = WeightScheme::power_law(0.5, 3.0);
  EXPECT_TRUE(big_c.clamped());
  EXPECT_EQ(big_c.alpha(2), 1.0);
  EXPECT_LT(big_c.alpha(10), 1.0);
  for (std::size_t i = 2; i < 100; ++i) EXPECT_LE(big_c.alpha(i + 1), big_c.alpha(i));
  EXPECT_THROW(WeightScheme::custom({1.0, 0.5}).alpha(3), Error);
}

TEST(Threshold, UniformFirstWeight) {
  const auto series = threshold_diagnostics(WeightScheme::uniform(), 1000);
  for (const auto& p : series) EXPECT_EQ(p.first_weight, 1.0 / static_cast<double>(p.i));
  EXPECT_THROW(threshold_diagnostics(WeightScheme::uniform(), 1), Error);
}

TEST(Threshold, SeriesMatchesTables) {
  const auto s = WeightScheme::power_law(0.75, 1.5);
  const auto series = threshold_diagnostics(s, 300);
  for (std::size_t i : {1u, 2u, 17u, 300u}) {
    const auto t = weights_for(s, i);
    EXPECT_NEAR(series[i - 1].first_weight, t.first_weight, 1e-13);
    EXPECT_NEAR(series[i - 1].theta, t.theta, 1e-13);
  }
}

TEST(Threshold, ForgettingBelowOne) {
  const auto series = threshold_diagnostics(WeightScheme::power_law(0.5, 1.0), 100000);
  EXPECT_LT(series.back().first_weight, 1e-100);
  for (std::size_t i = 100; i <= 100000; i *= 10) {
    const double ratio = series[i - 1].n_eff / std::sqrt(static_cast<double>(i));
    EXPECT_GE(ratio, 0.2);
    EXPECT_LE(ratio, 5.0);
  }
}

TEST(Threshold, MemoryAboveOne) {
  const auto s = WeightScheme::power_law(1.5, 1.0);
  const auto series = threshold_diagnostics(s, 100000);
  for (std::size_t i = 2; i < series.size(); ++i) ASSERT_LE(series[i].first_weight, series[i - 1].first_weight);
  for (const auto& p : series) ASSERT_GE(p.theta, p.first_weight * p.first_weight);
  const auto lim = first_weight_limit(s, 1000000);
  EXPECT_GT(lim.lower_bound, 0.05);
  // monotone decrease: every partial product brackets c* from above
  EXPECT_GE(series.back().first_weight, lim.partial_product);
  EXPECT_LE(lim.lower_bound, lim.partial_product);
  // the bracket is tight and the i = 1e5 value is within the tail bound of c*
  EXPECT_LT(lim.partial_product - lim.lower_bound, 3e-3 * lim.partial_product);
  const double tail = 2.0 / std::sqrt(1e5);
  EXPECT_LE(series.back().first_weight - lim.lower_bound, tail * series.back().first_weight + 1e-12);
  EXPECT_THROW(first_weight_limit(WeightScheme::power_law(0.5, 1.0), 10), Error);
}
