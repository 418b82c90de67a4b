#pragma once

#include "mrca/world.hpp"

namespace mrca {

struct RewardConfig {
  double r_arrival = 15.0;
  double omega_g = 2.5;
  double r_collision = -15.0;
  double omega_w = -0.1;
  double w_threshold = 0.7;
  double goal_radius = 0.1;

  void validate() const;
};

struct RewardBreakdown {
  double goal_term = 0.0;
  double collision_term = 0.0;
  double rotation_term = 0.0;
  double total = 0.0;
};

double goal_reward(double prev_dist, double dist, bool arrived,
                   const RewardConfig& cfg = {});
double collision_penalty(bool collided, const RewardConfig& cfg = {});
double rotation_penalty(double w, const RewardConfig& cfg = {});

/// Reward for one robot across one step. `after.w` must hold the rotational
/// velocity executed during the step. A collision suppresses the goal term,
/// so a robot that touches something inside the goal radius is not paid.
RewardBreakdown step_reward(const RobotState& before, const RobotState& after,
                            const RewardConfig& cfg = {});

}  // namespace mrca
