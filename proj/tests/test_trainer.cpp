#include "mrca/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mrca;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  FamilyParams fp;
  fp.family = "circle";
  fp.n = 2;
  fp.radius = 3.0;
  cfg.curriculum.stage1.scenarios = {fp};
  cfg.curriculum.stage1.robots = 2;
  cfg.curriculum.stage1.instances = 1;
  cfg.curriculum.stage2.scenarios.clear();
  cfg.train.T_max = 10;
  cfg.train.episode_steps = 12;
  cfg.train.E_pi = 2;
  cfg.train.E_V = 2;
  cfg.run.seed = 3;
  cfg.run.checkpoint_every = 1;
  return cfg;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Trainer, EpisodesFinishPastTmaxAndTruncate) {
  Trainer trainer(tiny_config());
  CollectStats stats;
  auto batch = trainer.collect(&stats);
  // One 12-step episode for each of two robots, even though T_max is 10.
  EXPECT_EQ(batch.size(), 24);
  EXPECT_EQ(stats.steps, 24);
  ASSERT_EQ(batch.trajectories.size(), 2u);
  for (const auto& tr : batch.trajectories) {
    EXPECT_EQ(tr.length, 12);
    EXPECT_FALSE(tr.terminal);
    EXPECT_EQ(tr.outcome, RobotStatus::kActive);
  }
  EXPECT_EQ(stats.timeouts, 2);
  EXPECT_EQ(stats.episodes, 2);
  finalize_batch(batch, trainer.config().train);
  EXPECT_TRUE(batch.advantages.allFinite());
  EXPECT_NEAR(batch.advantages.mean(), 0.0, 1e-9);
}

TEST(Trainer, IterationSmoke) {
  Trainer trainer(tiny_config());
  const auto m = trainer.iterate();
  EXPECT_EQ(m.iteration, 1);
  EXPECT_EQ(trainer.iteration(), 1);
  EXPECT_EQ(m.stage, 1);
  EXPECT_LE(m.policy.epochs, 2);
  EXPECT_EQ(m.value.epochs, 2);
  EXPECT_TRUE(std::isfinite(m.value.final_loss));
  EXPECT_EQ(m.beta_next, adapt_beta(m.beta_used, m.policy.final_kl, trainer.config().train));
  EXPECT_EQ(trainer.beta(), m.beta_next);
  const auto j = to_json(m);
  EXPECT_EQ(j.at("iteration"), 1);
  EXPECT_FALSE(j.contains("seconds"));
}

TEST(Trainer, SameSeedSameParameters) {
  Trainer a(tiny_config()), b(tiny_config());
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(to_json(a.iterate()).dump(), to_json(b.iterate()).dump());
  }
  EXPECT_EQ(a.policy().values(), b.policy().values());
  auto other = tiny_config();
  other.run.seed = 4;
  Trainer c(other);
  c.iterate();
  EXPECT_NE(c.policy().values(), a.policy().values());
}

TEST(Trainer, ResumeMatchesUninterrupted) {
  Trainer straight(tiny_config());
  straight.iterate();
  const Checkpoint mid = straight.checkpoint();
  straight.iterate();

  const auto path = std::filesystem::temp_directory_path() / "mrca_resume.ckpt";
  save_checkpoint(mid, path);
  Trainer resumed(tiny_config(), load_checkpoint(path));
  EXPECT_EQ(resumed.iteration(), 1);
  const auto m = resumed.iterate();
  EXPECT_EQ(m.iteration, 2);
  EXPECT_EQ(resumed.policy().values(), straight.policy().values());
  EXPECT_EQ(resumed.value().values(), straight.value().values());
  EXPECT_EQ(resumed.beta(), straight.beta());
}

TEST(Trainer, RunTrainingWritesDeterministicLogs) {
  const auto base = std::filesystem::temp_directory_path() / "mrca_run";
  std::filesystem::remove_all(base);
  auto cfg = tiny_config();
  cfg.run.iterations = 2;
  const auto r1 = run_training(cfg, base / "a");
  const auto r2 = run_training(cfg, base / "b");
  EXPECT_EQ(r1.iterations, 2);
  EXPECT_EQ(r2.iterations, 2);
  const auto log_a = read_file(base / "a" / "metrics.log");
  EXPECT_EQ(std::count(log_a.begin(), log_a.end(), '\n'), 2);
  EXPECT_EQ(log_a, read_file(base / "b" / "metrics.log"));
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "config.json"));
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "timing.log"));
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "checkpoints" / "latest.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "checkpoints" / "iter_000002.ckpt"));
  EXPECT_EQ(load_run_config(base / "a" / "config.json").run.seed, 3u);
}

TEST(Trainer, ResumedRunAppendsIdenticalLog) {
  const auto base = std::filesystem::temp_directory_path() / "mrca_run_resume";
  std::filesystem::remove_all(base);
  auto cfg = tiny_config();
  cfg.run.iterations = 3;
  run_training(cfg, base / "full");
  cfg.run.iterations = 1;
  run_training(cfg, base / "part");
  cfg.run.iterations = 3;
  run_training(cfg, base / "part", base / "part" / "checkpoints" / "latest.ckpt");
  EXPECT_EQ(read_file(base / "full" / "metrics.log"), read_file(base / "part" / "metrics.log"));
}

TEST(Trainer, StopsOnEvalSuccess) {
  auto cfg = tiny_config();
  cfg.run.iterations = 5;
  cfg.run.eval_every = 1;
  cfg.run.eval_trials = 2;
  cfg.run.eval_scenario.family = "circle";
  cfg.run.eval_scenario.n = 2;
  cfg.run.stop_success = 1e-9;  // any arrival stops training
  const auto base = std::filesystem::temp_directory_path() / "mrca_run_stop";
  std::filesystem::remove_all(base);
  const auto r = run_training(cfg, base);
  ASSERT_TRUE(r.last_eval.has_value());
  if (r.stopped_on_success) {
    EXPECT_GT(r.last_eval->success_rate, 0.0);
    EXPECT_LE(r.iterations, 5);
  } else {
    EXPECT_EQ(r.iterations, 5);
    EXPECT_EQ(r.best_eval_success, 0.0);
  }
}
