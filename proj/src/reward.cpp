#include "mrca/reward.hpp"

#include <cmath>

namespace mrca {

void RewardConfig::validate() const {
  if (!(r_arrival > 0.0)) throw ContractViolation("r_arrival must be > 0");
  if (!(r_collision < 0.0)) throw ContractViolation("r_collision must be < 0");
  if (!(omega_w <= 0.0)) throw ContractViolation("omega_w must be <= 0");
  if (!(goal_radius > 0.0)) throw ContractViolation("goal_radius must be > 0");
}

double goal_reward(double prev_dist, double dist, bool arrived,
                   const RewardConfig& cfg) {
  if (arrived) return cfg.r_arrival;
  return cfg.omega_g * (prev_dist - dist);
}

double collision_penalty(bool collided, const RewardConfig& cfg) {
  return collided ? cfg.r_collision : 0.0;
}

double rotation_penalty(double w, const RewardConfig& cfg) {
  return std::abs(w) > cfg.w_threshold ? cfg.omega_w * std::abs(w) : 0.0;
}

RewardBreakdown step_reward(const RobotState& before, const RobotState& after,
                            const RewardConfig& cfg) {
  RewardBreakdown out;
  const bool collided = after.status == RobotStatus::kCollided;
  const double dist = after.goal_distance();
  if (collided) {
    out.collision_term = collision_penalty(true, cfg);
  } else {
    out.goal_term = goal_reward(before.goal_distance(), dist,
                                dist < cfg.goal_radius, cfg);
  }
  out.rotation_term = rotation_penalty(after.w, cfg);
  out.total = out.goal_term + out.collision_term + out.rotation_term;
  return out;
}

}  // namespace mrca
