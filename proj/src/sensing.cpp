#include "mrca/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mrca {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

double beam_bearing(int k) {
  return -std::numbers::pi / 2.0 + k * std::numbers::pi / (kBeams - 1);
}

Vec2 sensor_origin(const RobotState& robot, const SensorConfig& cfg) {
  return robot.pose.position() +
         cfg.forward_offset * robot.radius * robot.pose.heading();
}

double ray_disc(const Vec2& origin, const Vec2& dir, const Vec2& center,
                double radius) {
  const Vec2 f = origin - center;
  const double c = f.squaredNorm() - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = f.dot(dir);
  if (b > 0.0) return kInf;  // pointing away and outside
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  return -b - std::sqrt(disc);
}

double ray_segment(const Vec2& origin, const Vec2& dir, const Segment& seg) {
  const Vec2 e = seg.b - seg.a;
  const double denom = cross(dir, e);
  const Vec2 ao = seg.a - origin;
  if (denom == 0.0) {
    // Parallel. Collinear overlap is reported at the nearest endpoint ahead.
    if (cross(ao, dir) != 0.0) return kInf;
    const double ta = ao.dot(dir);
    const double tb = (seg.b - origin).dot(dir);
    if (ta < 0.0 && tb < 0.0) return kInf;
    if (ta <= 0.0 || tb <= 0.0) return 0.0;
    return std::min(ta, tb);
  }
  const double t = cross(ao, e) / denom;
  const double u = cross(ao, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return kInf;
  return t;
}

LidarFrame raycast_scan(const WorldState& world, std::size_t robot_index,
                        const SensorConfig& cfg) {
  const RobotState& self = world.robots.at(robot_index);
  const Vec2 origin = sensor_origin(self, cfg);

  // Cull everything that cannot come within max range.
  std::vector<Disc> discs;
  discs.reserve(world.robots.size() + world.obstacles.discs.size());
  for (std::size_t j = 0; j < world.robots.size(); ++j) {
    if (j == robot_index) continue;
    const auto& r = world.robots[j];
    if ((r.pose.position() - origin).norm() - r.radius < kMaxRange)
      discs.push_back({r.pose.position(), r.radius});
  }
  for (const auto& d : world.obstacles.discs) {
    if ((d.center - origin).norm() - d.radius < kMaxRange) discs.push_back(d);
  }
  std::vector<Segment> segments;
  for (const auto& s : world.obstacles.segments) {
    if (point_segment_distance(origin, s) < kMaxRange) segments.push_back(s);
  }

  LidarFrame frame;
  for (int k = 0; k < kBeams; ++k) {
    const double a = self.pose.theta + beam_bearing(k);
    const Vec2 dir(std::cos(a), std::sin(a));
    double best = kMaxRange;
    for (const auto& d : discs)
      best = std::min(best, ray_disc(origin, dir, d.center, d.radius));
    for (const auto& s : segments)
      best = std::min(best, ray_segment(origin, dir, s));
    frame[k] = std::max(best, kMinRange);
  }
  return frame;
}

Vec2 relative_goal_polar(const RobotState& robot) {
  const Vec2 d = robot.goal - robot.pose.position();
  return {d.norm(), wrap_angle(std::atan2(d.y(), d.x()) - robot.pose.theta)};
}

ObsVector ObservationStack::flatten() const {
  ObsVector out;
  for (int f = 0; f < kFrames; ++f) out.segment<kBeams>(f * kBeams) = scans[f];
  out.segment<2>(kGoalOffset) = goal_polar;
  out.segment<2>(kVelocityOffset) = velocity;
  return out;
}

void ScanHistory::push(const LidarFrame& frame) {
  if (count_ == 0) {
    ring_.fill(frame);
    head_ = 0;
    count_ = kFrames;
    return;
  }
  head_ = (head_ + 1) % kFrames;
  ring_[head_] = frame;
}

std::array<LidarFrame, kFrames> ScanHistory::frames() const {
  std::array<LidarFrame, kFrames> out;
  for (int i = 0; i < kFrames; ++i)
    out[i] = ring_[(head_ + 1 + i) % kFrames];
  return out;
}

ObservationStack assemble_observation(const WorldState& world,
                                      std::size_t robot_index,
                                      ScanHistory& history,
                                      const SensorConfig& cfg) {
  history.push(raycast_scan(world, robot_index, cfg));
  const auto& robot = world.robots[robot_index];
  ObservationStack obs;
  obs.scans = history.frames();
  obs.goal_polar = relative_goal_polar(robot);
  obs.velocity = Vec2(robot.v, robot.w);
  return obs;
}

void RunningMoments::update(double x) {
  count += 1.0;
  const double delta = x - mean;
  mean += delta / count;
  m2 += delta * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count == 0.0) return;
  if (count == 0.0) {
    *this = other;
    return;
  }
  const double n = count + other.count;
  const double delta = other.mean - mean;
  mean += delta * other.count / n;
  m2 += other.m2 + delta * delta * count * other.count / n;
  count = n;
}

double RunningMoments::variance() const {
  return count < 2.0 ? 0.0 : std::max(m2 / (count - 1.0), 0.0);
}

double RunningMoments::stddev() const { return std::sqrt(variance()); }

int RunningNormalizer::channel_of(int index) {
  if (index < kGoalOffset) return kLidar;
  return kGoalDist + (index - kGoalOffset);
}

void RunningNormalizer::update(const ObsVector& obs) {
  // The lidar block is folded in as one batch to keep the pooled mean stable.
  RunningMoments lidar;
  for (int i = 0; i < kGoalOffset; ++i) lidar.update(obs[i]);
  stats_[kLidar].merge(lidar);
  for (int i = kGoalOffset; i < kObsDim; ++i)
    stats_[channel_of(i)].update(obs[i]);
}

void RunningNormalizer::merge(const RunningNormalizer& other) {
  for (int c = 0; c < kChannels; ++c) stats_[c].merge(other.stats_[c]);
}

ObsVector RunningNormalizer::normalize(const ObsVector& obs) const {
  ObsVector out;
  for (int i = 0; i < kObsDim; ++i) {
    const auto& m = stats_[channel_of(i)];
    if (m.count < 2.0) {
      out[i] = obs[i];
      continue;
    }
    const double z = (obs[i] - m.mean) / std::max(m.stddev(), kStdFloor);
    out[i] = std::clamp(z, -kClip, kClip);
  }
  return out;
}

bool RunningNormalizer::operator==(const RunningNormalizer& o) const {
  for (int c = 0; c < kChannels; ++c) {
    if (stats_[c].count != o.stats_[c].count ||
        stats_[c].mean != o.stats_[c].mean || stats_[c].m2 != o.stats_[c].m2)
      return false;
  }
  return true;
}

RunningNormalizer update_normalizer(RunningNormalizer norm,
                                    const ObservationStack& obs) {
  norm.update(obs.flatten());
  return norm;
}

ObsVector normalize(const ObservationStack& obs,
                    const RunningNormalizer& norm) {
  return norm.normalize(obs.flatten());
}

}  // namespace mrca
