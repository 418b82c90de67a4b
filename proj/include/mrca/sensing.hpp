#pragma once

#include "mrca/world.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace mrca {

inline constexpr int kBeams = 512;
inline constexpr int kFrames = 3;
inline constexpr double kMaxRange = 4.0;
/// Returned when the sensor origin already lies inside a body.
inline constexpr double kMinRange = 1e-3;
/// Flattened observation: 3 x 512 lidar (oldest first), goal (2), velocity (2).
inline constexpr int kObsDim = kFrames * kBeams + 4;
inline constexpr int kGoalOffset = kFrames * kBeams;
inline constexpr int kVelocityOffset = kGoalOffset + 2;

using LidarFrame = Eigen::Matrix<double, kBeams, 1>;
using ObsVector = Eigen::Matrix<double, kObsDim, 1>;

/// Beam k bearing relative to the heading: -pi/2 + k * pi / 511.
double beam_bearing(int k);

struct SensorConfig {
  /// Sensor mount distance ahead of the robot center, as a fraction of R.
  double forward_offset = 0.5;
};

Vec2 sensor_origin(const RobotState& robot, const SensorConfig& cfg = {});

/// Distance along a unit ray to the first hit with a disc, or +inf. Returns
/// 0 if the origin is inside the disc.
double ray_disc(const Vec2& origin, const Vec2& dir, const Vec2& center,
                double radius);
double ray_segment(const Vec2& origin, const Vec2& dir, const Segment& seg);

/// 180 degree scan from the robot's forward-mounted sensor. Other robots are
/// discs (collided ones included); the robot's own body is never hit.
LidarFrame raycast_scan(const WorldState& world, std::size_t robot_index,
                        const SensorConfig& cfg = {});

/// (distance, bearing) of the goal in the robot frame.
Vec2 relative_goal_polar(const RobotState& robot);

struct ObservationStack {
  std::array<LidarFrame, kFrames> scans;  // oldest -> newest
  Vec2 goal_polar = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();

  ObsVector flatten() const;
};

/// Sliding window over the last three scans of one robot.
class ScanHistory {
 public:
  void push(const LidarFrame& frame);
  bool empty() const { return count_ == 0; }
  void clear() { count_ = 0; }
  /// Frames ordered oldest -> newest.
  std::array<LidarFrame, kFrames> frames() const;

 private:
  std::array<LidarFrame, kFrames> ring_{};
  int head_ = 0;
  int count_ = 0;
};

/// Raycasts, pushes the frame into `history`, and fills goal/velocity.
/// An empty history is bootstrapped with three copies of the first frame.
ObservationStack assemble_observation(const WorldState& world,
                                      std::size_t robot_index,
                                      ScanHistory& history,
                                      const SensorConfig& cfg = {});

/// Welford accumulator for one scalar stream.
struct RunningMoments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x);
  /// Chan et al. pairwise merge.
  void merge(const RunningMoments& other);
  /// Sample variance (n - 1 denominator); 0 when count < 2.
  double variance() const;
  double stddev() const;
};

/// Observation statistics. Lidar scalars share one pooled channel; goal
/// distance, goal angle, v and w each have their own.
class RunningNormalizer {
 public:
  enum Channel : int { kLidar = 0, kGoalDist, kGoalAngle, kLinVel, kAngVel };
  static constexpr int kChannels = 5;
  static constexpr double kClip = 5.0;
  static constexpr double kStdFloor = 1e-8;

  static int channel_of(int index);

  void update(const ObsVector& obs);
  void merge(const RunningNormalizer& other);
  /// Pure; does not touch the statistics.
  ObsVector normalize(const ObsVector& obs) const;

  const RunningMoments& moments(int channel) const { return stats_[channel]; }
  RunningMoments& moments(int channel) { return stats_[channel]; }

  bool operator==(const RunningNormalizer& o) const;

 private:
  std::array<RunningMoments, kChannels> stats_{};
};

RunningNormalizer update_normalizer(RunningNormalizer norm,
                                    const ObservationStack& obs);
ObsVector normalize(const ObservationStack& obs,
                    const RunningNormalizer& norm);

}  // namespace mrca
