#include "mrca/checkpoint.hpp"
#include "mrca/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace mrca;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mrca_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.train.T_max = 1234;
  cfg.reward.omega_g = 3.0;
  cfg.curriculum.stage1.robots = 6;
  cfg.run.eval_scenario.family = "swap";
  const auto j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  EXPECT_EQ(back.train.T_max, 1234);
  EXPECT_EQ(back.reward.omega_g, 3.0);
  EXPECT_EQ(back.curriculum.stage1.robots, 6);
  EXPECT_EQ(back.run.eval_scenario.family, "swap");
  EXPECT_EQ(to_json(back), j);
}

TEST(Config, FileRoundTrip) {
  const auto dir = temp_dir("config");
  RunConfig cfg;
  cfg.run.seed = 77;
  save_run_config(cfg, dir / "c.json");
  EXPECT_EQ(load_run_config(dir / "c.json").run.seed, 77u);
  EXPECT_THROW(load_run_config(dir / "missing.json"), ConfigError);
}

TEST(Config, UnknownKeyNamesTheField) {
  nlohmann::json j = {{"train", {{"lamda", 0.9}}}};
  try {
    run_config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
  EXPECT_THROW(run_config_from_json({{"optimizer", nlohmann::json::object()}}), ConfigError);
}

TEST(Config, WrongTypeAndRangeAreRejected) {
  EXPECT_THROW(run_config_from_json({{"train", {{"T_max", "many"}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"train", {{"gamma", 1.5}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"reward", {{"r_collision", 3.0}}}}), ConfigError);
}

TEST(Config, MissingKeysKeepDefaults) {
  const RunConfig cfg = run_config_from_json({{"train", {{"E_pi", 5}}}});
  EXPECT_EQ(cfg.train.E_pi, 5);
  EXPECT_EQ(cfg.train.E_V, TrainConfig{}.E_V);
  EXPECT_EQ(cfg.train.kl_target, 0.0015);
}

TEST(Config, GoalRadiusFollowsReward) {
  const RunConfig cfg = run_config_from_json({{"reward", {{"goal_radius", 0.25}}}});
  EXPECT_EQ(cfg.world.goal_radius, 0.25);
}

TEST(Config, Overrides) {
  RunConfig cfg;
  apply_override(cfg, "train.T_max=64");
  apply_override(cfg, "run.out=/tmp/x");
  apply_override(cfg, "train.value_target=\"mc\"");
  EXPECT_EQ(cfg.train.T_max, 64);
  EXPECT_EQ(cfg.run.out, "/tmp/x");
  EXPECT_EQ(cfg.train.value_target, ValueTarget::kMonteCarlo);
  EXPECT_THROW(apply_override(cfg, "train.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "no_equals_sign"), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = temp_dir("ckpt");
  std::mt19937_64 rng(1);
  Checkpoint c;
  c.iteration = 12;
  c.stage = 2;
  c.beta = 1.5;
  initialize(c.policy, rng);
  initialize(c.value, rng);
  c.policy_adam = AdamState<float>(c.policy.values().size());
  c.policy_adam.m.setRandom();
  c.policy_adam.step = 9;
  ObsVector x = ObsVector::Random();
  c.normalizer.update(x);
  c.normalizer.update(ObsVector::Random());
  std::ostringstream s;
  s << rng;
  c.trainer_rng = s.str();
  c.env_rngs = {s.str(), "x"};
  c.recent_outcomes = {1, 0, 1};
  c.config = to_json(RunConfig{});
  save_checkpoint(c, dir / "a.ckpt");
  const Checkpoint d = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(d.iteration, 12);
  EXPECT_EQ(d.stage, 2);
  EXPECT_EQ(d.beta, 1.5);
  EXPECT_EQ(d.policy.values(), c.policy.values());
  EXPECT_EQ(d.value.values(), c.value.values());
  EXPECT_EQ(d.policy_adam.m, c.policy_adam.m);
  EXPECT_EQ(d.policy_adam.step, 9);
  EXPECT_EQ(d.trainer_rng, c.trainer_rng);
  EXPECT_EQ(d.env_rngs, c.env_rngs);
  EXPECT_EQ(d.recent_outcomes, c.recent_outcomes);
  EXPECT_EQ(d.config, c.config);
  for (int ch = 0; ch < RunningNormalizer::kChannels; ++ch) {
    EXPECT_EQ(d.normalizer.moments(ch).count, c.normalizer.moments(ch).count);
    EXPECT_EQ(d.normalizer.moments(ch).mean, c.normalizer.moments(ch).mean);
  }
  EXPECT_EQ(d.normalizer.normalize(x), c.normalizer.normalize(x));
}

TEST(Checkpoint, CorruptionAndTruncationAreDetected) {
  const auto dir = temp_dir("ckpt_bad");
  std::mt19937_64 rng(2);
  Checkpoint c;
  initialize(c.policy, rng);
  save_checkpoint(c, dir / "good.ckpt");
  std::string bytes;
  {
    std::ifstream in(dir / "good.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream out(dir / name, std::ios::binary);
    out << b;
    return dir / name;
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(load_checkpoint(write("flip.ckpt", flipped)), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("trunc.ckpt", bytes.substr(0, bytes.size() - 100))),
               CheckpointError);
  EXPECT_THROW(load_checkpoint(write("empty.ckpt", "")), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
  EXPECT_FALSE(std::filesystem::exists(dir / "good.ckpt.tmp"));
}

TEST(Checkpoint, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a", 1), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar", 6), 0x85944171f73967e8ULL);
}

TEST(Config, BundledConfigsLoad) {
  const std::filesystem::path dir = MRCA_SOURCE_DIR "/configs";
  for (const char* name : {"default.json", "circle4.json"}) {
    SCOPED_TRACE(name);
    RunConfig cfg;
    ASSERT_NO_THROW(cfg = load_run_config(dir / name));
    EXPECT_NO_THROW(cfg.validate());
  }
  const RunConfig c4 = load_run_config(dir / "circle4.json");
  EXPECT_EQ(c4.curriculum.stage1.robots, 4);
  EXPECT_FALSE(c4.curriculum.has_stage2());
  EXPECT_EQ(c4.run.stop_success, 0.9);
}
