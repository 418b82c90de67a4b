#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They share no code with the library beyond plain data types.

#include "mrca/world.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using mrca::Vec2;

/// Distance from c to the segment [a, b].
inline double dist_to_segment(const Vec2& c, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((c - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (a + t * d - c).norm();
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Proper or touching intersection of segments [p, q] and [a, b].
inline bool segments_meet(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double d1 = cross(b - a, p - a), d2 = cross(b - a, q - a);
  const double d3 = cross(q - p, a - p), d4 = cross(q - p, b - p);
  return ((d1 <= 0 && d2 >= 0) || (d1 >= 0 && d2 <= 0)) &&
         ((d3 <= 0 && d4 >= 0) || (d3 >= 0 && d4 <= 0));
}

/// Marches one ray in `step` increments. A hit is reported at the far end of
/// the first increment that touches a body, so the answer overshoots the
/// true range by at most one step.
inline double march_ray(const Vec2& origin, const Vec2& dir,
                        const std::vector<mrca::Disc>& discs,
                        const std::vector<mrca::Segment>& segments, double max_range,
                        double step = 1e-3) {
  for (const auto& d : discs)
    if ((origin - d.center).norm() < d.radius) return 0.0;
  const int n = static_cast<int>(std::ceil(max_range / step));
  for (int k = 1; k <= n; ++k) {
    const double s0 = (k - 1) * step;
    const double s1 = std::min(k * step, max_range);
    const Vec2 p = origin + s0 * dir, q = origin + s1 * dir;
    for (const auto& d : discs)
      if (dist_to_segment(d.center, p, q) < d.radius) return s1;
    for (const auto& s : segments)
      if (segments_meet(p, q, s.a, s.b)) return s1;
  }
  return max_range;
}

/// Brute-force GAE: A_t = sum_l (gamma lambda)^l delta_{t+l}.
inline Eigen::VectorXd gae_double_sum(const Eigen::VectorXd& r, const Eigen::VectorXd& v,
                                      double bootstrap, double gamma, double lambda) {
  const Eigen::Index n = r.size();
  Eigen::VectorXd delta(n), adv = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * next - v[t];
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    double w = 1.0;
    for (Eigen::Index l = 0; t + l < n; ++l) {
      adv[t] += w * delta[t + l];
      w *= gamma * lambda;
    }
  }
  return adv;
}

/// Random scene around robot 0: other robots, discs and segments, none
/// overlapping robot 0's body.
inline mrca::WorldState random_scene(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-4.5, 4.5), ang(-M_PI, M_PI),
      rad(0.1, 0.6), len(0.3, 3.0);
  std::uniform_int_distribution<int> count(0, 6);
  mrca::WorldState w;
  mrca::RobotState self;
  self.pose = {0.0, 0.0, ang(rng)};
  self.goal = {5.0, 5.0};
  w.robots.push_back(self);
  const double keep_out = self.radius + 0.05;
  const int robots = count(rng), discs = count(rng), segs = count(rng);
  while (static_cast<int>(w.robots.size()) < robots + 1) {
    mrca::RobotState r;
    r.pose = {pos(rng), pos(rng), ang(rng)};
    if (r.pose.position().norm() < keep_out + r.radius) continue;
    w.robots.push_back(r);
  }
  while (static_cast<int>(w.obstacles.discs.size()) < discs) {
    const mrca::Disc d{{pos(rng), pos(rng)}, rad(rng)};
    if (d.center.norm() < keep_out + d.radius) continue;
    w.obstacles.discs.push_back(d);
  }
  while (static_cast<int>(w.obstacles.segments.size()) < segs) {
    const Vec2 a(pos(rng), pos(rng));
    const double t = ang(rng);
    const mrca::Segment s{a, a + len(rng) * Vec2(std::cos(t), std::sin(t))};
    if (dist_to_segment(Vec2::Zero(), s.a, s.b) < keep_out) continue;
    w.obstacles.segments.push_back(s);
  }
  return w;
}

}  // namespace oracle
