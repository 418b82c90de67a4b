#pragma once

// Diagonal Gaussian action distribution helpers.

#include "mrca/world.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <random>

namespace mrca {

template <typename Derived1, typename Derived2, typename Derived3>
typename Derived1::Scalar log_prob(const Eigen::MatrixBase<Derived1>& mean,
                                   const Eigen::MatrixBase<Derived2>& logstd,
                                   const Eigen::MatrixBase<Derived3>& action) {
  using Scalar = typename Derived1::Scalar;
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
  Scalar lp(0);
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const Scalar z = (action(d) - mean(d)) / std::exp(logstd(d));
    lp += Scalar(-0.5) * z * z - logstd(d) - half_log_2pi;
  }
  return lp;
}

/// KL[old || new] between diagonal Gaussians.
template <typename D1, typename D2, typename D3, typename D4>
typename D1::Scalar kl_diag_gaussian(const Eigen::MatrixBase<D1>& mean_old,
                                     const Eigen::MatrixBase<D2>& logstd_old,
                                     const Eigen::MatrixBase<D3>& mean_new,
                                     const Eigen::MatrixBase<D4>& logstd_new) {
  using Scalar = typename D1::Scalar;
  Scalar kl(0);
  for (Eigen::Index d = 0; d < mean_old.size(); ++d) {
    const Scalar var_old = std::exp(Scalar(2) * logstd_old(d));
    const Scalar var_new = std::exp(Scalar(2) * logstd_new(d));
    const Scalar dm = mean_old(d) - mean_new(d);
    kl += logstd_new(d) - logstd_old(d) + (var_old + dm * dm) / (Scalar(2) * var_new) -
          Scalar(0.5);
  }
  return kl;
}

template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& logstd) {
  using Scalar = typename Derived::Scalar;
  const Scalar c = Scalar(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e));
  return logstd.sum() + c * Scalar(logstd.size());
}

struct SampledAction {
  Action action;            // clamped, executed
  Eigen::Vector2d raw;      // pre-clamp draw, scored by log_prob
};

/// Draws mean + exp(logstd) * z and clamps it into the action box.
inline SampledAction sample_action(const Eigen::Vector2d& mean,
                                   const Eigen::Vector2d& logstd,
                                   std::mt19937_64& rng, double v_max = 1.0,
                                   double w_max = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction out;
  for (int d = 0; d < 2; ++d)
    out.raw(d) = mean(d) + std::exp(logstd(d)) * normal(rng);
  out.action = clamp_action({out.raw(0), out.raw(1)}, v_max, w_max);
  return out;
}

}  // namespace mrca
