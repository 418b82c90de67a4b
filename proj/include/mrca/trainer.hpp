#pragma once

#include "mrca/checkpoint.hpp"
#include "mrca/config.hpp"
#include "mrca/eval.hpp"
#include "mrca/ppo.hpp"
#include "mrca/scenarios.hpp"
#include "mrca/sensing.hpp"

#include <json.hpp>

#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace mrca {

struct CollectStats {
  std::int64_t steps = 0;  // sum of T_i
  int episodes = 0;        // robot-episodes closed
  int arrivals = 0;
  int collisions = 0;
  int timeouts = 0;
  double mean_episode_reward = 0.0;
  std::vector<int> outcomes;  // 1 = arrived, closing order
};

struct IterationMetrics {
  int iteration = 0;  // 1-based index of the finished iteration
  int stage = 1;
  double lr_theta = 0.0;
  CollectStats collect;
  std::optional<double> rolling_success;
  double beta_used = 0.0;
  double beta_next = 0.0;
  PolicyUpdateResult policy;
  ValueUpdateResult value;
  std::optional<MetricsRecord> eval;
  StageDirective directive = StageDirective::kStay;
};

/// Deterministic metrics record (no wall-clock fields).
nlohmann::ordered_json to_json(const IterationMetrics& m);

/// Two-stage PPO trainer. Owns the networks, optimizers, normalizer and the
/// scenario instances of the current stage.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg);
  Trainer(RunConfig cfg, const Checkpoint& resume);

  /// One training iteration: collect, update policy, update value, adapt
  /// beta, then apply the curriculum directive.
  IterationMetrics iterate();

  /// Collects one batch with the current parameters. The normalizer is
  /// frozen during collection and absorbs the new statistics afterwards.
  RolloutBatch<TrainScalar> collect(CollectStats* stats = nullptr);

  Checkpoint checkpoint() const;

  int iteration() const { return iteration_; }
  int stage() const { return stage_; }
  double beta() const { return beta_; }
  const RunConfig& config() const { return cfg_; }
  const PolicyNet<TrainScalar>& policy() const { return policy_; }
  const ValueNet<TrainScalar>& value() const { return value_; }
  const RunningNormalizer& normalizer() const { return normalizer_; }
  std::optional<double> rolling_success() const;

 private:
  struct Env;
  const CurriculumStage& current_stage() const;
  void build_envs(const std::vector<std::string>* rng_states);
  void reset_env(Env& env) const;

  RunConfig cfg_;
  PolicyNet<TrainScalar> policy_;
  ValueNet<TrainScalar> value_;
  AdamState<TrainScalar> policy_adam_;
  AdamState<TrainScalar> value_adam_;
  RunningNormalizer normalizer_;
  std::mt19937_64 rng_;
  std::vector<std::shared_ptr<Env>> envs_;
  std::deque<int> recent_;
  int iteration_ = 0;
  int stage_ = 1;
  double beta_ = 1.0;
};

struct TrainRunResult {
  int iterations = 0;
  bool stopped_on_success = false;
  std::optional<MetricsRecord> last_eval;
  double best_eval_success = -1.0;
};

/// Runs training into `out`: config.json, metrics.log (deterministic),
/// timing.log (wall clock), checkpoints/latest.ckpt and
/// checkpoints/iter_NNNNNN.ckpt every run.checkpoint_every iterations.
/// A resume path continues from that checkpoint and appends to the logs.
TrainRunResult run_training(const RunConfig& cfg, const std::filesystem::path& out,
                            const std::optional<std::filesystem::path>& resume = {},
                            std::ostream* progress = nullptr);

}  // namespace mrca
