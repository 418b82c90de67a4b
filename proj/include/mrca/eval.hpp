#pragma once

#include "mrca/checkpoint.hpp"
#include "mrca/network.hpp"
#include "mrca/scenarios.hpp"
#include "mrca/sensing.hpp"
#include "mrca/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mrca {

/// Produces actions for the Active, policy-driven robots of a world.
class EvalPolicy {
 public:
  virtual ~EvalPolicy() = default;
  virtual std::string name() const = 0;
  /// Writes actions[i] for every i in `robots`. `histories` holds one scan
  /// window per robot of the episode and is owned by the caller.
  virtual void act(const WorldState& world, const std::vector<std::size_t>& robots,
                   std::vector<ScanHistory>& histories, std::mt19937_64& rng,
                   std::vector<Action>& actions) const = 0;
};

/// Turns toward the goal and drives when roughly facing it. Ignores
/// everything else in the world.
class GoStraightPolicy final : public EvalPolicy {
 public:
  explicit GoStraightPolicy(double w_max = 1.0, double turn_gain = 2.0)
      : w_max_(w_max), turn_gain_(turn_gain) {}
  std::string name() const override { return "baseline-straight"; }
  void act(const WorldState& world, const std::vector<std::size_t>& robots,
           std::vector<ScanHistory>& histories, std::mt19937_64& rng,
           std::vector<Action>& actions) const override;

 private:
  double w_max_;
  double turn_gain_;
};

/// Trained policy with a frozen normalizer. Deterministic mode executes the
/// Gaussian mean; otherwise actions are sampled.
class NetworkPolicy final : public EvalPolicy {
 public:
  NetworkPolicy(PolicyNet<TrainScalar> net, RunningNormalizer normalizer,
                bool deterministic = true, double w_max = 1.0);
  static std::unique_ptr<NetworkPolicy> from_checkpoint(
      const std::filesystem::path& path, bool deterministic = true);

  std::string name() const override { return "checkpoint"; }
  void act(const WorldState& world, const std::vector<std::size_t>& robots,
           std::vector<ScanHistory>& histories, std::mt19937_64& rng,
           std::vector<Action>& actions) const override;

 private:
  PolicyNet<TrainScalar> net_;
  RunningNormalizer normalizer_;
  bool deterministic_;
  double w_max_;
};

// Episodes ------------------------------------------------------------------

struct RobotOutcome {
  RobotStatus status = RobotStatus::kActive;  // kActive = timed out
  bool scripted = false;
  double travel_time = 0.0;     // arrival time, arrived robots only
  double path_length = 0.0;
  double straight_distance = 0.0;
  /// Straight distance minus the goal radius: no path can arrive sooner.
  double lower_bound_distance = 0.0;
  double v_max = 1.0;
};

struct EpisodeResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  bool obstacle_free = true;
  std::vector<RobotOutcome> robots;
};

/// Append-only replay log: a JSON header line, then one JSON line per step.
class ReplayWriter {
 public:
  explicit ReplayWriter(std::ostream& out) : out_(out) {}
  void header(const ScenarioSpec& spec, const WorldState& world);
  void step(const WorldState& world);

 private:
  std::ostream& out_;
};

inline constexpr int kReplaySchemaVersion = 1;

/// 60 s for up to 20 robots, 120 s beyond.
double default_time_limit(std::size_t robots);

/// Runs until every policy robot is done or the time limit passes. Scripted
/// robots replay their fixed action and are excluded from outcomes counted
/// by the metrics.
EpisodeResult run_episode(const EvalPolicy& policy, const ScenarioSpec& spec,
                          double time_limit, std::uint64_t seed,
                          ReplayWriter* replay = nullptr,
                          const WorldConfig& world_cfg = {});

// Metrics -------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

/// t_i - d_i / v_max for each (travel time, lower-bound distance, v_max).
MeanStd extra_time(const std::vector<RobotOutcome>& robots);
MeanStd extra_distance(const std::vector<RobotOutcome>& robots);
MeanStd average_speed(const std::vector<RobotOutcome>& robots);

inline constexpr const char* kInclusionRule = "arrived robots only";

struct MetricsRecord {
  std::string scenario;
  int trials = 0;
  std::size_t robots = 0;  // policy robots summed over trials
  std::size_t arrivals = 0;
  std::size_t collisions = 0;
  std::size_t timeouts = 0;
  double success_rate = 0.0;
  MeanStd extra_time;
  std::optional<MeanStd> extra_distance;  // obstacle-free families only
  MeanStd average_speed;
};

/// Aggregates policy robots over episodes; scripted movers are skipped.
MetricsRecord aggregate(const std::string& scenario,
                        const std::vector<EpisodeResult>& episodes);

nlohmann::ordered_json to_json(const MetricsRecord& m);
nlohmann::ordered_json to_json(const EpisodeResult& e, int trial);
std::string format_report(const MetricsRecord& m);

struct EvalOptions {
  int trials = 50;
  std::uint64_t seed = 1;
  double time_limit = -1.0;        // <= 0: default_time_limit
  std::filesystem::path raw_out;   // per-trial JSON lines, optional
  std::filesystem::path replay_out;  // replay log of trial 0, optional
  int workers = -1;
};

/// Trial k draws its scenario and policy noise from derive_seed(seed, k).
MetricsRecord evaluate(const EvalPolicy& policy, const FamilyParams& family,
                       const EvalOptions& opt,
                       std::vector<EpisodeResult>* episodes = nullptr);

/// Heterogeneous radii, non-cooperative movers, 100-robot circle.
std::vector<FamilyParams> generalization_families();

}  // namespace mrca
