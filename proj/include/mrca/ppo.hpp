#pragma once

// PPO with an adaptive KL penalty and a quadratic KL hinge.

#include "mrca/adam.hpp"
#include "mrca/network.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mrca {

enum class ValueTarget { kGae, kMonteCarlo };

struct TrainConfig {
  // Policy learning rates are per curriculum stage (CurriculumStage::lr_theta).
  double lambda = 0.95;
  double gamma = 0.99;
  int T_max = 8000;
  int E_pi = 20;
  double beta_init = 1.0;
  double kl_target = 0.0015;
  double xi = 50.0;
  int E_V = 10;
  double lr_phi = 1e-3;
  double beta_high = 2.0;
  double alpha = 1.5;
  double beta_low = 0.5;

  ValueTarget value_target = ValueTarget::kGae;
  bool normalize_advantages = true;
  double grad_clip = 5.0;
  int episode_steps = 1000;
  int chunk = 256;

  void validate() const;
};

// GAE ---------------------------------------------------------------------

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;  // advantages + values
};

/// Backward recursion A_t = delta_t + gamma * lambda * A_{t+1}.
/// `bootstrap` is V(s_{T}) for a truncated trajectory and 0 for a terminal one.
GaeResult compute_gae(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                      const Eigen::Ref<const Eigen::VectorXd>& values,
                      double bootstrap, double gamma, double lambda);

/// Discounted reward-to-go sum_{t' >= t} gamma^(t'-t) r_t' (+ discounted
/// bootstrap).
Eigen::VectorXd discounted_returns(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                                   double bootstrap, double gamma);

/// Shifts and scales to zero mean / unit (population) std. Leaves a
/// constant vector at zero.
void normalize_in_place(Eigen::VectorXd& v);

// Batch -------------------------------------------------------------------

/// One robot's contiguous run of steps inside a RolloutBatch.
struct TrajectorySlice {
  Eigen::Index begin = 0;
  Eigen::Index length = 0;
  bool terminal = false;      // false: truncated, bootstrap holds V(s_T)
  double bootstrap = 0.0;
  RobotStatus outcome = RobotStatus::kActive;  // kActive = timed out
  double episode_return = 0.0;
};

template <typename Scalar>
struct RolloutBatch {
  MatrixX<Scalar> obs;             // kObsDim x N, normalized
  Eigen::Matrix2Xd actions;        // pre-clamp samples
  Eigen::VectorXd logp_old;
  Eigen::Matrix2Xd mean_old;
  Eigen::Vector2d logstd_old = Eigen::Vector2d::Zero();
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  Eigen::VectorXd advantages;      // normalized when configured
  Eigen::VectorXd returns;         // value regression targets
  std::vector<TrajectorySlice> trajectories;

  Eigen::Index size() const { return rewards.size(); }
  void resize(Eigen::Index n);
};

/// Fills advantages and returns from rewards/values per trajectory.
template <typename Scalar>
void finalize_batch(RolloutBatch<Scalar>& batch, const TrainConfig& cfg);

// Objective ---------------------------------------------------------------

struct ObjectiveResult {
  double objective = 0.0;  // maximized
  double surrogate = 0.0;  // mean ratio * advantage
  double mean_kl = 0.0;
  double hinge = 0.0;      // xi * max(0, KL - 2 KL_target)^2
};

/// Batch-mean KL[pi_old || pi_theta].
template <typename Scalar>
double batch_mean_kl(const RolloutBatch<Scalar>& batch,
                     const PolicyNet<Scalar>& policy, int chunk = 256);

/// Evaluates the penalized surrogate. When `grad` is non-null it receives the
/// gradient of the objective (ascent direction) w.r.t. the policy parameters.
template <typename Scalar>
ObjectiveResult ppo_objective(const RolloutBatch<Scalar>& batch,
                              const PolicyNet<Scalar>& policy, double beta,
                              const TrainConfig& cfg,
                              VectorX<Scalar>* grad = nullptr);

struct PolicyUpdateResult {
  int epochs = 0;             // Adam steps actually taken
  bool early_stopped = false;
  std::vector<double> kl_before_epoch;  // KL checked before each epoch
  double final_kl = 0.0;      // KL after the last executed epoch
  double objective = 0.0;     // objective at the last executed epoch
  int clipped_steps = 0;
};

template <typename Scalar>
PolicyUpdateResult update_policy(const RolloutBatch<Scalar>& batch,
                                 PolicyNet<Scalar>& policy,
                                 AdamState<Scalar>& adam, double beta,
                                 double lr, const TrainConfig& cfg);

struct ValueUpdateResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;   // loss before the last Adam step
  int epochs = 0;
};

/// Mean squared error between V and the batch returns, plus its gradient.
template <typename Scalar>
double value_loss(const RolloutBatch<Scalar>& batch, const ValueNet<Scalar>& net,
                  VectorX<Scalar>* grad = nullptr, int chunk = 256);

template <typename Scalar>
ValueUpdateResult update_value(const RolloutBatch<Scalar>& batch,
                               ValueNet<Scalar>& net, AdamState<Scalar>& adam,
                               const TrainConfig& cfg, int epochs = -1);

/// KL penalty coefficient schedule.
double adapt_beta(double beta, double mean_kl, const TrainConfig& cfg);

}  // namespace mrca
