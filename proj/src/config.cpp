#include "mrca/config.hpp"

#include <fstream>
#include <sstream>

namespace mrca {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Recursively rejects keys in `input` that the defaults do not have.
void check_keys(const json& input, const json& reference, const std::string& path) {
  if (!input.is_object()) return;
  if (!reference.is_object())
    throw ConfigError("config: '" + path + "' must not be an object");
  for (const auto& [key, value] : input.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("config: unknown key '" + here + "'");
    const auto& ref = reference.at(key);
    if (ref.is_object()) {
      check_keys(value, ref, here);
    } else if (key == "scenarios") {
      if (!value.is_array()) throw ConfigError("config: '" + here + "' must be a list");
      const json fam = to_json(FamilyParams{});
      for (std::size_t i = 0; i < value.size(); ++i)
        check_keys(value[i], fam, here + "[" + std::to_string(i) + "]");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + section + "." + key + "' has the wrong type");
  }
}

ojson stage_json(const CurriculumStage& s) {
  ojson j;
  j["robots"] = s.robots;
  j["instances"] = s.instances;
  j["lr_theta"] = s.lr_theta;
  j["scenarios"] = ojson::array();
  for (const auto& fp : s.scenarios) j["scenarios"].push_back(to_json(fp));
  return j;
}

CurriculumStage stage_from(const json& j, CurriculumStage s, const std::string& sec) {
  read(j, "robots", s.robots, sec);
  read(j, "instances", s.instances, sec);
  read(j, "lr_theta", s.lr_theta, sec);
  if (j.contains("scenarios")) {
    s.scenarios.clear();
    for (const auto& f : j.at("scenarios")) s.scenarios.push_back(family_from_json(f));
  }
  return s;
}

}  // namespace

ojson to_json(const FamilyParams& fp) {
  ojson j;
  j["family"] = fp.family;
  j["n"] = fp.n;
  j["radius"] = fp.radius;
  j["arena"] = fp.arena;
  j["obstacles"] = fp.obstacles;
  j["archetype"] = fp.archetype;
  j["even_spacing"] = fp.even_spacing;
  j["random_rotation"] = fp.random_rotation;
  j["robot_radius"] = fp.robot_radius;
  j["v_max"] = fp.v_max;
  j["radius_jitter"] = fp.radius_jitter;
  return j;
}

FamilyParams family_from_json(const json& j) {
  FamilyParams fp;
  const std::string s = "scenario";
  read(j, "family", fp.family, s);
  read(j, "n", fp.n, s);
  read(j, "radius", fp.radius, s);
  read(j, "arena", fp.arena, s);
  read(j, "obstacles", fp.obstacles, s);
  read(j, "archetype", fp.archetype, s);
  read(j, "even_spacing", fp.even_spacing, s);
  read(j, "random_rotation", fp.random_rotation, s);
  read(j, "robot_radius", fp.robot_radius, s);
  read(j, "v_max", fp.v_max, s);
  read(j, "radius_jitter", fp.radius_jitter, s);
  return fp;
}

void RunConfig::validate() const {
  try {
    train.validate();
    reward.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (!(world.dt > 0.0)) throw ConfigError("config: world.dt must be > 0");
  if (!(world.robot_radius > 0.0)) throw ConfigError("config: world.R must be > 0");
  if (!(world.v_max > 0.0)) throw ConfigError("config: world.v_max must be > 0");
  if (curriculum.stage1.scenarios.empty())
    throw ConfigError("config: curriculum.stage1.scenarios must not be empty");
  for (const auto* st : {&curriculum.stage1, &curriculum.stage2}) {
    if (st->instances < 1 || st->robots < st->instances)
      throw ConfigError("config: each stage needs instances >= 1 and robots >= instances");
  }
  if (run.iterations < 0) throw ConfigError("config: run.iterations must be >= 0");
  if (run.eval_every < 0 || run.eval_trials < 1)
    throw ConfigError("config: run.eval_every must be >= 0 and run.eval_trials >= 1");
  if (run.checkpoint_every < 1) throw ConfigError("config: run.checkpoint_every must be >= 1");
}

ojson to_json(const RunConfig& c) {
  ojson j;
  j["run"] = {{"seed", c.run.seed},
              {"iterations", c.run.iterations},
              {"checkpoint_every", c.run.checkpoint_every},
              {"out", c.run.out},
              {"eval_every", c.run.eval_every},
              {"eval_trials", c.run.eval_trials},
              {"eval_scenario", to_json(c.run.eval_scenario)},
              {"stop_success", c.run.stop_success}};
  ojson t;
  t["lambda"] = c.train.lambda;
  t["gamma"] = c.train.gamma;
  t["T_max"] = c.train.T_max;
  t["E_pi"] = c.train.E_pi;
  t["beta"] = c.train.beta_init;
  t["KL_target"] = c.train.kl_target;
  t["xi"] = c.train.xi;
  t["E_V"] = c.train.E_V;
  t["lr_phi"] = c.train.lr_phi;
  t["beta_high"] = c.train.beta_high;
  t["alpha"] = c.train.alpha;
  t["beta_low"] = c.train.beta_low;
  t["value_target"] = c.train.value_target == ValueTarget::kGae ? "gae" : "mc";
  t["normalize_advantages"] = c.train.normalize_advantages;
  t["grad_clip"] = c.train.grad_clip;
  t["episode_steps"] = c.train.episode_steps;
  t["chunk"] = c.train.chunk;
  j["train"] = t;
  j["reward"] = {{"r_arrival", c.reward.r_arrival},
                 {"omega_g", c.reward.omega_g},
                 {"r_collision", c.reward.r_collision},
                 {"omega_w", c.reward.omega_w},
                 {"w_threshold", c.reward.w_threshold},
                 {"goal_radius", c.reward.goal_radius}};
  j["world"] = {{"dt", c.world.dt},
                {"R", c.world.robot_radius},
                {"v_max", c.world.v_max},
                {"w_max", c.world.w_max}};
  j["init"] = {{"hidden_gain", c.init.hidden_gain},
               {"policy_head_gain", c.init.policy_head_gain},
               {"value_head_gain", c.init.value_head_gain},
               {"logstd", c.init.initial_logstd}};
  ojson cur;
  cur["switch_success"] = c.curriculum.switch_success;
  cur["success_window"] = c.curriculum.success_window;
  cur["stage1_iteration_cap"] = c.curriculum.stage1_iteration_cap;
  cur["stage1"] = stage_json(c.curriculum.stage1);
  cur["stage2"] = stage_json(c.curriculum.stage2);
  j["curriculum"] = cur;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig c;
  check_keys(j, json(to_json(c)), "");

  if (j.contains("run")) {
    const auto& s = j.at("run");
    read(s, "seed", c.run.seed, "run");
    read(s, "iterations", c.run.iterations, "run");
    read(s, "checkpoint_every", c.run.checkpoint_every, "run");
    read(s, "out", c.run.out, "run");
    read(s, "eval_every", c.run.eval_every, "run");
    read(s, "eval_trials", c.run.eval_trials, "run");
    read(s, "stop_success", c.run.stop_success, "run");
    if (s.contains("eval_scenario")) c.run.eval_scenario = family_from_json(s.at("eval_scenario"));
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    const std::string n = "train";
    read(s, "lambda", c.train.lambda, n);
    read(s, "gamma", c.train.gamma, n);
    read(s, "T_max", c.train.T_max, n);
    read(s, "E_pi", c.train.E_pi, n);
    read(s, "beta", c.train.beta_init, n);
    read(s, "KL_target", c.train.kl_target, n);
    read(s, "xi", c.train.xi, n);
    read(s, "E_V", c.train.E_V, n);
    read(s, "lr_phi", c.train.lr_phi, n);
    read(s, "beta_high", c.train.beta_high, n);
    read(s, "alpha", c.train.alpha, n);
    read(s, "beta_low", c.train.beta_low, n);
    std::string vt = c.train.value_target == ValueTarget::kGae ? "gae" : "mc";
    read(s, "value_target", vt, n);
    if (vt == "gae")
      c.train.value_target = ValueTarget::kGae;
    else if (vt == "mc")
      c.train.value_target = ValueTarget::kMonteCarlo;
    else
      throw ConfigError("config: field 'train.value_target' must be 'gae' or 'mc'");
    read(s, "normalize_advantages", c.train.normalize_advantages, n);
    read(s, "grad_clip", c.train.grad_clip, n);
    read(s, "episode_steps", c.train.episode_steps, n);
    read(s, "chunk", c.train.chunk, n);
  }
  if (j.contains("reward")) {
    const auto& s = j.at("reward");
    const std::string n = "reward";
    read(s, "r_arrival", c.reward.r_arrival, n);
    read(s, "omega_g", c.reward.omega_g, n);
    read(s, "r_collision", c.reward.r_collision, n);
    read(s, "omega_w", c.reward.omega_w, n);
    read(s, "w_threshold", c.reward.w_threshold, n);
    read(s, "goal_radius", c.reward.goal_radius, n);
  }
  if (j.contains("world")) {
    const auto& s = j.at("world");
    read(s, "dt", c.world.dt, "world");
    read(s, "R", c.world.robot_radius, "world");
    read(s, "v_max", c.world.v_max, "world");
    read(s, "w_max", c.world.w_max, "world");
  }
  c.world.goal_radius = c.reward.goal_radius;
  if (j.contains("init")) {
    const auto& s = j.at("init");
    read(s, "hidden_gain", c.init.hidden_gain, "init");
    read(s, "policy_head_gain", c.init.policy_head_gain, "init");
    read(s, "value_head_gain", c.init.value_head_gain, "init");
    read(s, "logstd", c.init.initial_logstd, "init");
  }
  if (j.contains("curriculum")) {
    const auto& s = j.at("curriculum");
    read(s, "switch_success", c.curriculum.switch_success, "curriculum");
    read(s, "success_window", c.curriculum.success_window, "curriculum");
    read(s, "stage1_iteration_cap", c.curriculum.stage1_iteration_cap, "curriculum");
    if (s.contains("stage1"))
      c.curriculum.stage1 = stage_from(s.at("stage1"), c.curriculum.stage1, "curriculum.stage1");
    if (s.contains("stage2"))
      c.curriculum.stage2 = stage_from(s.at("stage2"), c.curriculum.stage2, "curriculum.stage2");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path.string() + "'");
  out << to_json(cfg).dump(2) << '\n';
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json j = to_json(cfg);
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i]))
      throw ConfigError("override: unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  *node = value;
  cfg = run_config_from_json(j);
}

}  // namespace mrca
