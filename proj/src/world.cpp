#include "mrca/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mrca {

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

Vec2 Pose::heading() const { return {std::cos(theta), std::sin(theta)}; }

char status_code(RobotStatus s) {
  switch (s) {
    case RobotStatus::kActive:
      return 'A';
    case RobotStatus::kArrived:
      return 'G';
    case RobotStatus::kCollided:
      return 'C';
  }
  return '?';
}

RobotStatus status_from_code(char c) {
  switch (c) {
    case 'A':
      return RobotStatus::kActive;
    case 'G':
      return RobotStatus::kArrived;
    case 'C':
      return RobotStatus::kCollided;
    default:
      throw ContractViolation(std::string("unknown status code '") + c +
                                  "'");
  }
}

void ObstacleSet::validate() const {
  for (const auto& s : segments) {
    if ((s.b - s.a).norm() <= 0.0)
      throw ContractViolation("obstacle segment has zero length");
  }
  for (const auto& d : discs) {
    if (!(d.radius > 0.0))
      throw ContractViolation("obstacle disc radius must be positive");
  }
}

std::size_t WorldState::active_count() const {
  return static_cast<std::size_t>(std::count_if(
      robots.begin(), robots.end(), [](const auto& r) { return r.active(); }));
}

Pose integrate_unicycle(const Pose& pose, double v, double w, double dt) {
  Pose out;
  out.x = pose.x + v * std::cos(pose.theta) * dt;
  out.y = pose.y + v * std::sin(pose.theta) * dt;
  out.theta = wrap_angle(pose.theta + w * dt);
  return out;
}

double point_segment_distance(const Vec2& p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (p - s.a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (s.a + t * d - p).norm();
}

std::vector<bool> detect_collisions(const WorldState& world) {
  const auto& robots = world.robots;
  const std::size_t n = robots.size();
  std::vector<bool> hit(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 pi = robots[i].pose.position();
    for (const auto& seg : world.obstacles.segments) {
      if (point_segment_distance(pi, seg) < robots[i].radius) {
        hit[i] = true;
        break;
      }
    }
    if (hit[i]) continue;
    for (const auto& disc : world.obstacles.discs) {
      if ((pi - disc.center).norm() < robots[i].radius + disc.radius) {
        hit[i] = true;
        break;
      }
    }
  }

  // Pairs involving an already collided robot are ignored.
  for (std::size_t i = 0; i < n; ++i) {
    if (robots[i].status == RobotStatus::kCollided) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (robots[j].status == RobotStatus::kCollided) continue;
      const double d =
          (robots[i].pose.position() - robots[j].pose.position()).norm();
      if (d < robots[i].radius + robots[j].radius) {
        hit[i] = true;
        hit[j] = true;
      }
    }
  }
  return hit;
}

bool is_arrived(const RobotState& robot, double goal_radius) {
  return robot.goal_distance() < goal_radius;
}

Action clamp_action(const Action& a, double v_max, double w_max) {
  return {std::clamp(a.v, 0.0, v_max), std::clamp(a.w, -w_max, w_max)};
}

WorldState advance_world(const WorldState& world,
                         const std::vector<Action>& actions) {
  if (actions.size() != world.robots.size()) {
    throw ContractViolation("advance_world: expected " +
                            std::to_string(world.robots.size()) +
                            " actions, got " + std::to_string(actions.size()));
  }
  WorldState next = world;
  for (std::size_t i = 0; i < next.robots.size(); ++i) {
    auto& r = next.robots[i];
    if (!r.active()) continue;
    r.v = actions[i].v;
    r.w = actions[i].w;
    r.pose = integrate_unicycle(r.pose, r.v, r.w, next.dt);
  }

  const auto hit = detect_collisions(next);
  for (std::size_t i = 0; i < next.robots.size(); ++i) {
    auto& r = next.robots[i];
    if (!r.active()) continue;
    if (hit[i]) {
      r.status = RobotStatus::kCollided;
    } else if (is_arrived(r, next.goal_radius)) {
      r.status = RobotStatus::kArrived;
    }
  }
  next.step += 1;
  next.time = static_cast<double>(next.step) * next.dt;
  return next;
}

}  // namespace mrca
