#pragma once

#include "mrca/network.hpp"
#include "mrca/ppo.hpp"
#include "mrca/reward.hpp"
#include "mrca/scenarios.hpp"
#include "mrca/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace mrca {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSettings {
  std::uint64_t seed = 1;
  int iterations = 500;
  int checkpoint_every = 10;
  std::string out = "runs/default";
  /// Deterministic evaluation every `eval_every` iterations (0 disables).
  int eval_every = 0;
  int eval_trials = 50;
  FamilyParams eval_scenario;
  /// Training ends once an evaluation reaches this success rate (<= 0 disables).
  double stop_success = 0.0;
};

/// Everything a training run depends on. The JSON form has one object per
/// section: run, train, reward, world, init, curriculum.
struct RunConfig {
  RunSettings run;
  TrainConfig train;
  RewardConfig reward;
  WorldConfig world;
  NetInit init;
  CurriculumSpec curriculum = default_curriculum();

  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Strict parse: unknown sections or keys raise ConfigError naming the field.
/// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Applies "section.key=value" (dotted path into the JSON form). The value is
/// parsed as JSON when possible and as a bare string otherwise.
void apply_override(RunConfig& cfg, const std::string& assignment);

nlohmann::ordered_json to_json(const FamilyParams& fp);
FamilyParams family_from_json(const nlohmann::json& j);

}  // namespace mrca
