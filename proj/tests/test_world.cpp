#include "mrca/world.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mrca;

namespace {

RobotState robot_at(double x, double y, double theta = 0.0, double radius = 0.2) {
  RobotState r;
  r.pose = {x, y, theta};
  r.radius = radius;
  r.goal = {100.0, 100.0};
  return r;
}

WorldState world_of(std::vector<RobotState> robots) {
  WorldState w;
  w.robots = std::move(robots);
  return w;
}

}  // namespace

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3.0 * std::numbers::pi / 2.0), -std::numbers::pi / 2.0, 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -std::numbers::pi);
    EXPECT_LE(w, std::numbers::pi);
    EXPECT_NEAR(std::remainder(a - w, 2.0 * std::numbers::pi), 0.0, 1e-12);
  }
}

TEST(Unicycle, StraightStep) {
  const Pose p = integrate_unicycle({0, 0, 0}, 1.0, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(p.x, 0.1);
  EXPECT_DOUBLE_EQ(p.y, 0.0);
  EXPECT_DOUBLE_EQ(p.theta, 0.0);
}

TEST(Unicycle, ZeroCommandIsIdentity) {
  const Pose in{1.5, -2.0, 0.7};
  const Pose p = integrate_unicycle(in, 0.0, 0.0, 0.1);
  EXPECT_EQ(p.x, in.x);
  EXPECT_EQ(p.y, in.y);
  EXPECT_EQ(p.theta, in.theta);
}

TEST(Unicycle, PureRotationWraps) {
  const Pose p = integrate_unicycle({0, 0, 0}, 0.0, 1.0, std::numbers::pi);
  EXPECT_EQ(p.x, 0.0);
  EXPECT_EQ(p.y, 0.0);
  EXPECT_DOUBLE_EQ(p.theta, std::numbers::pi);
}

TEST(Unicycle, UsesPreStepHeading) {
  const Pose p = integrate_unicycle({0, 0, 0}, 1.0, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(p.x, 0.1);
  EXPECT_DOUBLE_EQ(p.y, 0.0);
  EXPECT_DOUBLE_EQ(p.theta, 0.1);
}

TEST(Collisions, RobotPairThreshold) {
  EXPECT_EQ(detect_collisions(world_of({robot_at(0, 0), robot_at(0.5, 0)})),
            (std::vector<bool>{false, false}));
  EXPECT_EQ(detect_collisions(world_of({robot_at(0, 0), robot_at(0.39, 0)})),
            (std::vector<bool>{true, true}));
}

TEST(Collisions, SegmentAndDisc) {
  WorldState w = world_of({robot_at(0, 0.15), robot_at(5, 0)});
  w.obstacles.segments.push_back({{-1, 0}, {1, 0}});
  w.obstacles.discs.push_back({{5.5, 0}, 0.35});
  EXPECT_EQ(detect_collisions(w), (std::vector<bool>{true, true}));
  w.obstacles.discs[0].radius = 0.3;  // touching exactly is not a collision
  EXPECT_EQ(detect_collisions(w), (std::vector<bool>{true, false}));
}

TEST(Collisions, SymmetricOnRandomLayouts) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RobotState> rs;
    for (int i = 0; i < 8; ++i) rs.push_back(robot_at(u(rng), u(rng)));
    const auto hit = detect_collisions(world_of(rs));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      bool expected = false;
      for (std::size_t j = 0; j < rs.size(); ++j)
        if (i != j && (rs[i].pose.position() - rs[j].pose.position()).norm() < 0.4)
          expected = true;
      EXPECT_EQ(hit[i], expected);
    }
  }
}

TEST(Arrival, StrictThreshold) {
  RobotState r = robot_at(0, 0);
  r.goal = {0.05, 0};
  EXPECT_TRUE(is_arrived(r));
  r.goal = {0.1, 0};
  EXPECT_FALSE(is_arrived(r));
  r.goal = {0, 0};
  EXPECT_TRUE(is_arrived(r));
}

TEST(AdvanceWorld, ActionCountMismatchThrows) {
  WorldState w = world_of({robot_at(0, 0), robot_at(3, 0)});
  EXPECT_THROW(advance_world(w, {Action{}}), ContractViolation);
}

TEST(AdvanceWorld, AllArrivedOnlyTimeMoves) {
  WorldState w = world_of({robot_at(0, 0), robot_at(3, 0)});
  for (auto& r : w.robots) {
    r.status = RobotStatus::kArrived;
    r.v = 0.4;
    r.w = -0.2;
  }
  const WorldState next = advance_world(w, {Action{1, 1}, Action{1, -1}});
  ASSERT_EQ(next.robots.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(next.robots[i].pose.x, w.robots[i].pose.x);
    EXPECT_EQ(next.robots[i].pose.y, w.robots[i].pose.y);
    EXPECT_EQ(next.robots[i].pose.theta, w.robots[i].pose.theta);
    EXPECT_EQ(next.robots[i].v, w.robots[i].v);
    EXPECT_EQ(next.robots[i].w, w.robots[i].w);
    EXPECT_EQ(next.robots[i].status, RobotStatus::kArrived);
  }
  EXPECT_DOUBLE_EQ(next.time, w.time + w.dt);
  EXPECT_EQ(next.step, w.step + 1);
}

TEST(AdvanceWorld, TenStraightStepsCoverOneMetre) {
  const double heading = 0.6;
  WorldState w = world_of({robot_at(1, 2, heading)});
  for (int k = 0; k < 10; ++k) w = advance_world(w, {Action{1, 0}});
  const Vec2 d = w.robots[0].pose.position() - Vec2(1, 2);
  EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  EXPECT_NEAR(std::atan2(d.y(), d.x()), heading, 1e-12);
  EXPECT_NEAR(w.time, 1.0, 1e-12);
}

TEST(AdvanceWorld, HeadOnPairCollidesAndFreezes) {
  // Closing speed 2 m/s from 1.0 m apart: gap after k steps is 1 - 0.2 k,
  // which first drops below 0.4 at k = 4 (0.2 m).
  WorldState w = world_of({robot_at(-0.5, 0, 0), robot_at(0.5, 0, std::numbers::pi)});
  int collided_at = -1;
  for (int k = 1; k <= 10; ++k) {
    const WorldState prev = w;
    w = advance_world(w, {Action{1, 0}, Action{1, 0}});
    const double gap = (w.robots[0].pose.position() - w.robots[1].pose.position()).norm();
    if (collided_at < 0 && w.robots[0].status == RobotStatus::kCollided) {
      collided_at = k;
      EXPECT_LT(gap, 0.4);
      EXPECT_GE((prev.robots[0].pose.position() - prev.robots[1].pose.position()).norm(), 0.4);
    }
    if (collided_at > 0 && k > collided_at) {
      EXPECT_EQ(w.robots[0].pose.x, prev.robots[0].pose.x);
      EXPECT_EQ(w.robots[1].pose.x, prev.robots[1].pose.x);
    }
  }
  EXPECT_EQ(collided_at, 4);
  EXPECT_EQ(w.robots[1].status, RobotStatus::kCollided);
}

TEST(AdvanceWorld, EulerDisplacementBoundedAndDeterministic) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uv(0.0, 1.0), uw(-1.0, 1.0);
  WorldState w = world_of({robot_at(0, 0), robot_at(5, 5), robot_at(-5, 5)});
  for (int k = 0; k < 200; ++k) {
    std::vector<Action> acts;
    for (std::size_t i = 0; i < w.robots.size(); ++i) acts.push_back({uv(rng), uw(rng)});
    const WorldState a = advance_world(w, acts);
    const WorldState b = advance_world(w, acts);
    for (std::size_t i = 0; i < w.robots.size(); ++i) {
      EXPECT_EQ(a.robots[i].pose.x, b.robots[i].pose.x);
      EXPECT_EQ(a.robots[i].pose.theta, b.robots[i].pose.theta);
      const double step = (a.robots[i].pose.position() - w.robots[i].pose.position()).norm();
      EXPECT_LE(step, w.robots[i].v_max * w.dt + 1e-15);
    }
    w = a;
  }
}

TEST(Status, MonotoneAndCodesRoundTrip) {
  for (auto s : {RobotStatus::kActive, RobotStatus::kArrived, RobotStatus::kCollided})
    EXPECT_EQ(status_from_code(status_code(s)), s);
  EXPECT_THROW(status_from_code('x'), ContractViolation);

  RobotState r = robot_at(0, 0);
  r.goal = {0.15, 0};
  WorldState w = world_of({r});
  w = advance_world(w, {Action{1, 0}});
  ASSERT_EQ(w.robots[0].status, RobotStatus::kArrived);
  const Pose frozen = w.robots[0].pose;
  for (int k = 0; k < 5; ++k) w = advance_world(w, {Action{1, 1}});
  EXPECT_EQ(w.robots[0].status, RobotStatus::kArrived);
  EXPECT_EQ(w.robots[0].pose.x, frozen.x);
}

TEST(ClampAction, Box) {
  const Action a = clamp_action({1.7, -3.0}, 1.0, 1.0);
  EXPECT_EQ(a.v, 1.0);
  EXPECT_EQ(a.w, -1.0);
  const Action b = clamp_action({-0.2, 0.3}, 1.0, 1.0);
  EXPECT_EQ(b.v, 0.0);
  EXPECT_EQ(b.w, 0.3);
}

TEST(Obstacles, ValidateRejectsDegenerate) {
  ObstacleSet o;
  o.segments.push_back({{0, 0}, {0, 0}});
  EXPECT_THROW(o.validate(), ContractViolation);
  o.segments.clear();
  o.discs.push_back({{0, 0}, 0.0});
  EXPECT_THROW(o.validate(), ContractViolation);
}
