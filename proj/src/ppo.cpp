#include "mrca/ppo.hpp"

#include "mrca/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mrca {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ContractViolation("train config: " + m); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must be in [0, 1]");
  if (!(alpha > 1.0)) fail("alpha must be > 1");
  if (T_max < 1) fail("T_max must be >= 1");
  if (E_pi < 0 || E_V < 0) fail("epoch counts must be >= 0");
  if (!(beta_init > 0.0)) fail("beta must be > 0");
  if (!(kl_target > 0.0)) fail("kl_target must be > 0");
  if (episode_steps < 1) fail("episode_steps must be >= 1");
  if (chunk < 1) fail("chunk must be >= 1");
}

GaeResult compute_gae(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                      const Eigen::Ref<const Eigen::VectorXd>& values,
                      double bootstrap, double gamma, double lambda) {
  if (rewards.size() != values.size())
    throw ContractViolation("compute_gae: rewards and values differ in length");
  const Eigen::Index n = rewards.size();
  GaeResult out;
  out.advantages.resize(n);
  double next_value = bootstrap;
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

Eigen::VectorXd discounted_returns(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                                   double bootstrap, double gamma) {
  Eigen::VectorXd out(rewards.size());
  double running = bootstrap;
  for (Eigen::Index t = rewards.size() - 1; t >= 0; --t) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

void normalize_in_place(Eigen::VectorXd& v) {
  if (v.size() == 0) return;
  const double mean = v.mean();
  v.array() -= mean;
  const double std = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
  if (std > 1e-8) v /= std;
}

template <typename Scalar>
void RolloutBatch<Scalar>::resize(Eigen::Index n) {
  obs.resize(kObsDim, n);
  actions.resize(2, n);
  logp_old.resize(n);
  mean_old.resize(2, n);
  rewards.resize(n);
  values.resize(n);
  advantages.resize(n);
  returns.resize(n);
}

template <typename Scalar>
void finalize_batch(RolloutBatch<Scalar>& batch, const TrainConfig& cfg) {
  batch.advantages.resize(batch.size());
  batch.returns.resize(batch.size());
  for (const auto& tr : batch.trajectories) {
    const auto r = batch.rewards.segment(tr.begin, tr.length);
    const auto v = batch.values.segment(tr.begin, tr.length);
    const double boot = tr.terminal ? 0.0 : tr.bootstrap;
    GaeResult g = compute_gae(r, v, boot, cfg.gamma, cfg.lambda);
    batch.advantages.segment(tr.begin, tr.length) = g.advantages;
    if (cfg.value_target == ValueTarget::kGae) {
      batch.returns.segment(tr.begin, tr.length) = g.returns;
    } else {
      batch.returns.segment(tr.begin, tr.length) =
          discounted_returns(r, boot, cfg.gamma);
    }
  }
  if (cfg.normalize_advantages) normalize_in_place(batch.advantages);
}

namespace {

// Above this many samples the objective recomputes forward passes instead of
// holding every chunk's tape (about 115 KB per sample in float).
constexpr Eigen::Index kTapeCacheSamples = 4096;

template <typename Scalar>
Eigen::Index chunk_end(Eigen::Index begin, Eigen::Index n, int chunk) {
  return std::min<Eigen::Index>(n, begin + chunk);
}

}  // namespace

template <typename Scalar>
double batch_mean_kl(const RolloutBatch<Scalar>& batch,
                     const PolicyNet<Scalar>& policy, int chunk) {
  const Eigen::Index n = batch.size();
  if (n == 0) return 0.0;
  const Eigen::Vector2d ls_new = policy.logstd().template cast<double>();
  double sum = 0.0;
  ForwardTape<Scalar> tape;
  for (Eigen::Index b = 0; b < n; b += chunk) {
    const Eigen::Index e = chunk_end<Scalar>(b, n, chunk);
    const auto out = policy_forward(policy, batch.obs.middleCols(b, e - b), tape);
    for (Eigen::Index t = b; t < e; ++t) {
      const Eigen::Vector2d mu = out.mean.col(t - b).template cast<double>();
      sum += kl_diag_gaussian(batch.mean_old.col(t), batch.logstd_old, mu, ls_new);
    }
  }
  return sum / static_cast<double>(n);
}

template <typename Scalar>
ObjectiveResult ppo_objective(const RolloutBatch<Scalar>& batch,
                              const PolicyNet<Scalar>& policy, double beta,
                              const TrainConfig& cfg, VectorX<Scalar>* grad) {
  const Eigen::Index n = batch.size();
  ObjectiveResult res;
  if (grad) grad->setZero(PolicyNet<Scalar>::layout().size());
  if (n == 0) return res;
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::Vector2d ls_new = policy.logstd().template cast<double>();
  const Eigen::Vector2d var_new = (2.0 * ls_new).array().exp();
  const Eigen::Vector2d var_old = (2.0 * batch.logstd_old).array().exp();

  // The hinge gradient depends on the batch-mean KL, so every mean must be
  // known before any per-sample gradient is formed. Tapes are kept for the
  // backward pass when the batch is small enough; otherwise the forward pass
  // is repeated chunk by chunk.
  const Eigen::Index chunks = (n + cfg.chunk - 1) / cfg.chunk;
  const bool keep_tapes = grad && n <= kTapeCacheSamples;
  std::vector<ForwardTape<Scalar>> tapes(keep_tapes ? chunks : 1);
  Eigen::Matrix2Xd means(2, n);
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index b = c * cfg.chunk;
    const Eigen::Index e = chunk_end<Scalar>(b, n, cfg.chunk);
    auto& tape = tapes[keep_tapes ? c : 0];
    const auto out = policy_forward(policy, batch.obs.middleCols(b, e - b), tape);
    means.middleCols(b, e - b) = out.mean.template cast<double>();
  }

  double surrogate = 0.0;
  double kl_sum = 0.0;
  Eigen::VectorXd ratio(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Vector2d mu = means.col(t);
    const double lp = log_prob(mu, ls_new, batch.actions.col(t));
    ratio[t] = std::exp(lp - batch.logp_old[t]);
    surrogate += ratio[t] * batch.advantages[t];
    kl_sum += kl_diag_gaussian(batch.mean_old.col(t), batch.logstd_old, mu, ls_new);
  }
  res.surrogate = surrogate * inv_n;
  res.mean_kl = kl_sum * inv_n;
  res.hinge = cfg.xi * std::pow(std::max(0.0, res.mean_kl - 2.0 * cfg.kl_target), 2);
  res.objective = res.surrogate - beta * res.mean_kl - res.hinge;
  if (!grad) return res;

  const double kl_coeff =
      beta + 2.0 * cfg.xi * std::max(0.0, res.mean_kl - 2.0 * cfg.kl_target);
  Eigen::Vector2d d_logstd = Eigen::Vector2d::Zero();
  ForwardTape<Scalar> scratch;
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index b = c * cfg.chunk;
    const Eigen::Index e = chunk_end<Scalar>(b, n, cfg.chunk);
    MatrixX<Scalar> d_mean(2, e - b);
    for (Eigen::Index t = b; t < e; ++t) {
      const Eigen::Vector2d mu = means.col(t);
      const Eigen::Vector2d diff = batch.actions.col(t) - mu;
      const Eigen::Vector2d dmu_old = mu - batch.mean_old.col(t);
      const double w = ratio[t] * batch.advantages[t] * inv_n;
      for (int d = 0; d < 2; ++d) {
        const double g_surr = w * diff[d] / var_new[d];
        const double g_kl = inv_n * dmu_old[d] / var_new[d];
        d_mean(d, t - b) = static_cast<Scalar>(g_surr - kl_coeff * g_kl);
        d_logstd[d] += w * (diff[d] * diff[d] / var_new[d] - 1.0) -
                       kl_coeff * inv_n *
                           (1.0 - (var_old[d] + dmu_old[d] * dmu_old[d]) / var_new[d]);
      }
    }
    ForwardTape<Scalar>* tape = &scratch;
    if (keep_tapes) {
      tape = &tapes[c];
    } else {
      policy_forward(policy, batch.obs.middleCols(b, e - b), scratch);
    }
    policy_backward(policy, *tape, d_mean, Vector2<Scalar>::Zero().eval(), *grad);
    if (keep_tapes) tapes[c] = ForwardTape<Scalar>{};
  }
  const auto& info = PolicyNet<Scalar>::layout().block(Block::kLogStd);
  grad->segment(info.offset, 2) += d_logstd.template cast<Scalar>();
  return res;
}

template <typename Scalar>
PolicyUpdateResult update_policy(const RolloutBatch<Scalar>& batch,
                                 PolicyNet<Scalar>& policy,
                                 AdamState<Scalar>& adam, double beta, double lr,
                                 const TrainConfig& cfg) {
  PolicyUpdateResult res;
  VectorX<Scalar> grad;
  double kl = 0.0;
  bool kl_current = false;
  for (int epoch = 0; epoch < cfg.E_pi; ++epoch) {
    // One pass yields both the KL check for this epoch and its gradient.
    const auto obj = ppo_objective(batch, policy, beta, cfg, &grad);
    kl = obj.mean_kl;
    kl_current = true;
    res.kl_before_epoch.push_back(kl);
    if (kl > 4.0 * cfg.kl_target) {
      res.early_stopped = true;
      break;
    }
    if (!std::isfinite(obj.objective) || !grad.allFinite())
      throw std::runtime_error("ppo objective is not finite; aborting epoch");
    res.objective = obj.objective;
    // Adam minimizes, the objective is maximized.
    grad = -grad;
    if (clip_global_norm(grad, cfg.grad_clip) > cfg.grad_clip) ++res.clipped_steps;
    adam.apply(policy.mutable_values(), grad, lr);
    ++res.epochs;
    kl_current = false;
  }
  if (!kl_current) kl = batch_mean_kl(batch, policy, cfg.chunk);
  res.final_kl = kl;
  return res;
}

template <typename Scalar>
double value_loss(const RolloutBatch<Scalar>& batch, const ValueNet<Scalar>& net,
                  VectorX<Scalar>* grad, int chunk) {
  const Eigen::Index n = batch.size();
  if (grad) grad->setZero(ValueNet<Scalar>::layout().size());
  if (n == 0) return 0.0;
  double loss = 0.0;
  ForwardTape<Scalar> tape;
  for (Eigen::Index b = 0; b < n; b += chunk) {
    const Eigen::Index e = chunk_end<Scalar>(b, n, chunk);
    const auto v = value_forward(net, batch.obs.middleCols(b, e - b), tape);
    RowVectorX<Scalar> d(e - b);
    for (Eigen::Index t = b; t < e; ++t) {
      const double err = static_cast<double>(v[t - b]) - batch.returns[t];
      loss += err * err;
      d[t - b] = static_cast<Scalar>(2.0 * err / static_cast<double>(n));
    }
    if (grad) value_backward(net, tape, d, *grad);
  }
  return loss / static_cast<double>(n);
}

template <typename Scalar>
ValueUpdateResult update_value(const RolloutBatch<Scalar>& batch,
                               ValueNet<Scalar>& net, AdamState<Scalar>& adam,
                               const TrainConfig& cfg, int epochs) {
  if (epochs < 0) epochs = cfg.E_V;
  ValueUpdateResult res;
  VectorX<Scalar> grad;
  for (int k = 0; k < epochs; ++k) {
    const double loss = value_loss(batch, net, &grad, cfg.chunk);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw std::runtime_error("value loss is not finite; aborting");
    if (k == 0) res.initial_loss = loss;
    res.final_loss = loss;
    clip_global_norm(grad, cfg.grad_clip);
    adam.apply(net.mutable_values(), grad, cfg.lr_phi);
    ++res.epochs;
  }
  return res;
}

double adapt_beta(double beta, double mean_kl, const TrainConfig& cfg) {
  if (mean_kl > cfg.beta_high * cfg.kl_target) return beta * cfg.alpha;
  if (mean_kl < cfg.beta_low * cfg.kl_target) return beta / cfg.alpha;
  return beta;
}

#define MRCA_INSTANTIATE_PPO(S)                                                 \
  template struct RolloutBatch<S>;                                              \
  template void finalize_batch<S>(RolloutBatch<S>&, const TrainConfig&);        \
  template double batch_mean_kl<S>(const RolloutBatch<S>&, const PolicyNet<S>&, \
                                   int);                                        \
  template ObjectiveResult ppo_objective<S>(const RolloutBatch<S>&,             \
                                            const PolicyNet<S>&, double,        \
                                            const TrainConfig&, VectorX<S>*);   \
  template PolicyUpdateResult update_policy<S>(                                 \
      const RolloutBatch<S>&, PolicyNet<S>&, AdamState<S>&, double, double,     \
      const TrainConfig&);                                                      \
  template double value_loss<S>(const RolloutBatch<S>&, const ValueNet<S>&,     \
                                VectorX<S>*, int);                              \
  template ValueUpdateResult update_value<S>(const RolloutBatch<S>&,            \
                                             ValueNet<S>&, AdamState<S>&,       \
                                             const TrainConfig&, int);

MRCA_INSTANTIATE_PPO(float)
MRCA_INSTANTIATE_PPO(double)

#undef MRCA_INSTANTIATE_PPO

}  // namespace mrca
