#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrca {

using Vec2 = Eigen::Vector2d;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const;
};

enum class RobotStatus : std::uint8_t { kActive, kArrived, kCollided };

char status_code(RobotStatus s);
RobotStatus status_from_code(char c);

struct RobotState {
  Pose pose;
  double v = 0.0;
  double w = 0.0;
  double radius = 0.2;
  Vec2 goal = Vec2::Zero();
  double v_max = 1.0;
  RobotStatus status = RobotStatus::kActive;

  bool active() const { return status == RobotStatus::kActive; }
  double goal_distance() const { return (goal - pose.position()).norm(); }
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

struct ObstacleSet {
  std::vector<Segment> segments;
  std::vector<Disc> discs;

  bool empty() const { return segments.empty() && discs.empty(); }
  /// Throws ContractViolation on zero-length segments or non-positive radii.
  void validate() const;
};

/// Shared physical constants. Defaults are the homogeneous training setup.
struct WorldConfig {
  double dt = 0.1;
  double robot_radius = 0.2;
  double v_max = 1.0;
  double w_max = 1.0;
  double goal_radius = 0.1;
};

struct WorldState {
  std::vector<RobotState> robots;
  ObstacleSet obstacles;
  double time = 0.0;
  double dt = 0.1;
  std::int64_t step = 0;
  double goal_radius = 0.1;

  std::size_t active_count() const;
};

/// Commanded velocity pair for one robot.
struct Action {
  double v = 0.0;
  double w = 0.0;
};

/// Explicit Euler step of the unicycle model using the pre-step heading.
Pose integrate_unicycle(const Pose& pose, double v, double w, double dt);

double point_segment_distance(const Vec2& p, const Segment& s);

/// Per-robot collision flags. A robot is flagged when it overlaps another
/// non-collided robot (center distance < r_i + r_j) or lies closer than its
/// radius to any obstacle primitive.
std::vector<bool> detect_collisions(const WorldState& world);

bool is_arrived(const RobotState& robot, double goal_radius = 0.1);

/// Moves every Active robot with its action held for dt, then updates
/// collision and arrival status (collision first). Actions are indexed by
/// robot; entries for non-Active robots are ignored.
WorldState advance_world(const WorldState& world,
                         const std::vector<Action>& actions);

/// Clamps an action into the robot's admissible box [0, v_max] x [-w_max, w_max].
Action clamp_action(const Action& a, double v_max, double w_max = 1.0);

}  // namespace mrca
