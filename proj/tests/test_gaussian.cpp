#include "mrca/gaussian.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mrca;

TEST(Gaussian, LogProbMatchesDensity) {
  const Eigen::Vector2d mean(0.3, -0.2), logstd(-0.69, 0.1), a(0.5, 0.4);
  double expected = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double s = std::exp(logstd(d));
    expected += std::log(std::exp(-0.5 * std::pow((a(d) - mean(d)) / s, 2)) /
                         (s * std::sqrt(2 * std::numbers::pi)));
  }
  EXPECT_NEAR(log_prob(mean, logstd, a), expected, 1e-13);
}

TEST(Gaussian, DensityIntegratesToOne) {
  const Eigen::Matrix<double, 1, 1> mean(0.4), logstd(-0.5);
  const double h = 1e-3;
  double total = 0.0;
  for (double x = -6; x <= 6; x += h) {
    const Eigen::Matrix<double, 1, 1> a(x);
    total += std::exp(log_prob(mean, logstd, a)) * h;
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Gaussian, KlNonNegativeAndZeroAtEquality) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d m0(n(rng), n(rng)), s0(n(rng) * 0.5, n(rng) * 0.5);
    const Eigen::Vector2d m1(n(rng), n(rng)), s1(n(rng) * 0.5, n(rng) * 0.5);
    EXPECT_GE(kl_diag_gaussian(m0, s0, m1, s1), 0.0);
    EXPECT_NEAR(kl_diag_gaussian(m0, s0, m0, s0), 0.0, 1e-15);
  }
}

TEST(Gaussian, KlClosedFormExample) {
  // KL[N(0,1) || N(1,2^2)] = log 2 + (1 + 1)/8 - 1/2.
  const Eigen::Matrix<double, 1, 1> m0(0.0), s0(0.0), m1(1.0), s1(std::log(2.0));
  EXPECT_NEAR(kl_diag_gaussian(m0, s0, m1, s1), std::log(2.0) + 0.25 - 0.5, 1e-15);
}

TEST(Gaussian, EntropyExample) {
  const Eigen::Vector2d logstd(0.0, 0.0);
  EXPECT_NEAR(entropy(logstd), std::log(2 * std::numbers::pi * std::numbers::e), 1e-14);
}

TEST(Gaussian, SamplesAreClampedButRawIsKept) {
  std::mt19937_64 rng(5);
  const Eigen::Vector2d mean(0.95, 0.0), logstd(0.5, 0.5);
  bool saw_clamp = false;
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_action(mean, logstd, rng);
    EXPECT_GE(s.action.v, 0.0);
    EXPECT_LE(s.action.v, 1.0);
    EXPECT_LE(std::abs(s.action.w), 1.0);
    if (s.raw(0) > 1.0) {
      saw_clamp = true;
      EXPECT_EQ(s.action.v, 1.0);
    }
  }
  EXPECT_TRUE(saw_clamp);
}
