#pragma once

#include "mrca/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrca {

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayRobot {
  double radius = 0.2;
  Pose start;
  Vec2 goal = Vec2::Zero();
  bool scripted = false;
};

struct ReplayFrame {
  std::int64_t step = 0;
  std::vector<Pose> poses;
  std::vector<RobotStatus> status;
};

struct ReplayLog {
  std::string scenario;
  double dt = 0.1;
  double goal_radius = 0.1;
  std::vector<ReplayRobot> robots;
  std::vector<Segment> segments;
  std::vector<Disc> discs;
  std::vector<ReplayFrame> frames;
};

/// Parses a replay log. Errors name the offending 1-based line.
ReplayLog parse_replay(const std::filesystem::path& path);

/// Per-robot trajectory polylines (plus obstacles, starts and goals) as SVG.
std::string render_svg(const ReplayLog& log);

struct ReplayRobotSummary {
  RobotStatus outcome = RobotStatus::kActive;
  double end_time = 0.0;  // time of the status change, or of the last frame
  double path_length = 0.0;
  double straight_distance = 0.0;
};

std::vector<ReplayRobotSummary> summarize(const ReplayLog& log);
std::string format_summary(const ReplayLog& log);

}  // namespace mrca
