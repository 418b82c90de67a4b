#include "mrca/eval.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace mrca;

namespace {

RobotSpawn spawn(double x, double y, double theta, double gx, double gy) {
  RobotSpawn s;
  s.start = {x, y, theta};
  s.goal = {gx, gy};
  return s;
}

ScenarioSpec single_straight() {
  ScenarioSpec spec;
  spec.name = "straight";
  spec.robots.push_back(spawn(0, 0, 0, 4.05, 0));
  return spec;
}

}  // namespace

TEST(Episode, StraightRunTiming) {
  const GoStraightPolicy policy;
  const auto res = run_episode(policy, single_straight(), 60.0, 1);
  ASSERT_EQ(res.robots.size(), 1u);
  const auto& r = res.robots[0];
  EXPECT_EQ(r.status, RobotStatus::kArrived);
  EXPECT_NEAR(r.travel_time, 4.0, 1e-9);
  EXPECT_NEAR(r.path_length, 4.0, 1e-9);
  EXPECT_NEAR(r.straight_distance, 4.05, 1e-12);
  EXPECT_NEAR(r.lower_bound_distance, 3.95, 1e-12);
  EXPECT_EQ(res.steps, 40);
  const auto et = extra_time(res.robots);
  EXPECT_NEAR(et.mean, 0.05, 1e-9);
  EXPECT_NEAR(extra_distance(res.robots).mean, 0.05, 1e-9);
  EXPECT_NEAR(average_speed(res.robots).mean, 1.0, 1e-9);
}

TEST(Episode, HeadOnSwapCollides) {
  ScenarioSpec spec;
  spec.name = "swap2";
  spec.robots.push_back(spawn(-2, 0, 0, 2, 0));
  spec.robots.push_back(spawn(2, 0, M_PI, -2, 0));
  const auto res = run_episode(GoStraightPolicy{}, spec, 60.0, 1);
  for (const auto& r : res.robots) EXPECT_EQ(r.status, RobotStatus::kCollided);
  const auto m = aggregate("swap2", {res});
  EXPECT_EQ(m.collisions, 2u);
  EXPECT_EQ(m.success_rate, 0.0);
  EXPECT_EQ(m.extra_time.count, 0u);
}

TEST(Episode, TimeoutLeavesRobotActive) {
  ScenarioSpec spec;
  spec.robots.push_back(spawn(0, 0, 0, 100, 0));
  const auto res = run_episode(GoStraightPolicy{}, spec, 2.0, 1);
  EXPECT_EQ(res.robots[0].status, RobotStatus::kActive);
  EXPECT_EQ(res.steps, 20);
  EXPECT_NEAR(res.robots[0].path_length, 2.0, 1e-9);
  const auto m = aggregate("far", {res});
  EXPECT_EQ(m.timeouts, 1u);
}

TEST(Episode, ScriptedRobotsAreExcluded) {
  ScenarioSpec spec = single_straight();
  RobotSpawn mover = spawn(0, 5, 0, 20, 5);
  mover.scripted = true;
  mover.scripted_action = {1.0, 0.0};
  spec.robots.push_back(mover);
  const auto res = run_episode(GoStraightPolicy{}, spec, 60.0, 1);
  ASSERT_EQ(res.robots.size(), 2u);
  EXPECT_TRUE(res.robots[1].scripted);
  // The episode ends when the last policy robot is done.
  EXPECT_EQ(res.steps, 40);
  const auto m = aggregate("mixed", {res});
  EXPECT_EQ(m.robots, 1u);
  EXPECT_EQ(m.arrivals, 1u);
}

TEST(Episode, ReplayLogHasHeaderAndSteps) {
  std::ostringstream out;
  ReplayWriter writer(out);
  run_episode(GoStraightPolicy{}, single_straight(), 60.0, 1, &writer);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (lines == 0) {
      EXPECT_EQ(j.at("schema"), kReplaySchemaVersion);
    } else {
      EXPECT_EQ(j.at("robots").size(), 1u);
    }
    ++lines;
  }
  EXPECT_EQ(lines, 1 + 1 + 40);  // header, initial state, 40 steps
}

TEST(Metrics, MeanStdIsPopulation) {
  const auto m = mean_std({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.std, std::sqrt(2.0 / 3.0));
  EXPECT_EQ(m.count, 3u);
  const auto e = mean_std({});
  EXPECT_EQ(e.count, 0u);
  EXPECT_EQ(e.mean, 0.0);
}

TEST(Metrics, ArrivedOnlyArithmetic) {
  RobotOutcome a;
  a.status = RobotStatus::kArrived;
  a.travel_time = 10.0;
  a.path_length = 8.0;
  a.lower_bound_distance = 6.0;
  RobotOutcome b = a;
  b.travel_time = 5.0;
  b.path_length = 5.0;
  b.lower_bound_distance = 4.0;
  b.v_max = 0.5;
  RobotOutcome c;
  c.status = RobotStatus::kCollided;
  c.path_length = 3.0;
  const std::vector<RobotOutcome> rs{a, b, c};
  const auto et = extra_time(rs);
  EXPECT_EQ(et.count, 2u);
  EXPECT_DOUBLE_EQ(et.mean, ((10.0 - 6.0) + (5.0 - 8.0)) / 2);
  EXPECT_DOUBLE_EQ(extra_distance(rs).mean, (2.0 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(average_speed(rs).mean, (0.8 + 1.0) / 2);
}

TEST(Metrics, AggregateCountsAndJson) {
  EpisodeResult e;
  e.robots.resize(4);
  e.robots[0].status = RobotStatus::kArrived;
  e.robots[0].travel_time = 2.0;
  e.robots[0].path_length = 2.0;
  e.robots[1].status = RobotStatus::kCollided;
  e.robots[2].status = RobotStatus::kActive;
  e.robots[3].status = RobotStatus::kArrived;
  e.robots[3].travel_time = 1.0;
  e.robots[3].path_length = 1.0;
  const auto m = aggregate("x", {e, e});
  EXPECT_EQ(m.trials, 2);
  EXPECT_EQ(m.robots, 8u);
  EXPECT_EQ(m.arrivals, 4u);
  EXPECT_EQ(m.collisions, 2u);
  EXPECT_EQ(m.timeouts, 2u);
  EXPECT_DOUBLE_EQ(m.success_rate, 0.5);
  const auto j = to_json(m);
  EXPECT_EQ(j.at("inclusion"), kInclusionRule);
  EXPECT_EQ(j.at("arrivals"), 4);
  e.obstacle_free = false;
  EXPECT_FALSE(aggregate("y", {e}).extra_distance.has_value());
}

TEST(Metrics, TimeLimits) {
  EXPECT_EQ(default_time_limit(20), 60.0);
  EXPECT_EQ(default_time_limit(21), 120.0);
}

TEST(Evaluate, DeterministicAcrossWorkerCounts) {
  FamilyParams fp;
  fp.family = "random";
  fp.n = 6;
  fp.arena = 8.0;
  fp.obstacles = 4;
  EvalOptions opt;
  opt.trials = 6;
  opt.seed = 42;
  opt.workers = 1;
  const auto a = evaluate(GoStraightPolicy{}, fp, opt);
  opt.workers = 3;
  const auto b = evaluate(GoStraightPolicy{}, fp, opt);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  opt.seed = 43;
  const auto c = evaluate(GoStraightPolicy{}, fp, opt);
  EXPECT_EQ(c.robots, a.robots);
}

TEST(Evaluate, RecordNameIncludesSize) {
  FamilyParams fp;
  fp.n = 4;
  fp.radius = 3.0;
  EvalOptions opt;
  opt.trials = 2;
  EXPECT_EQ(evaluate(GoStraightPolicy{}, fp, opt).scenario, "circle-4");
}

TEST(Evaluate, GeneralizationFamilies) {
  const auto fams = generalization_families();
  ASSERT_EQ(fams.size(), 3u);
  EXPECT_EQ(fams[0].family, "heterogeneous");
  EXPECT_EQ(fams[1].family, "noncooperative");
  EXPECT_EQ(fams[2].family, "circle");
  EXPECT_EQ(fams[2].n, 100);
}
