#include "mrca/replay.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mrca {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::filesystem::path& p, std::size_t line, const std::string& what) {
  throw ReplayError(p.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

ReplayLog parse_replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ReplayError("cannot open replay log '" + path.string() + "'");
  ReplayLog log;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) fail(path, line_no, "empty line");
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(path, line_no, "malformed record");
    try {
      if (!have_header) {
        if (j.at("schema").get<int>() != 1) fail(path, line_no, "unsupported schema version");
        log.scenario = j.at("scenario").get<std::string>();
        log.dt = j.at("dt").get<double>();
        log.goal_radius = j.at("goal_radius").get<double>();
        for (const auto& r : j.at("robots")) {
          ReplayRobot rr;
          rr.radius = r.at("radius").get<double>();
          const auto& s = r.at("start");
          rr.start = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
          rr.goal = {r.at("goal").at(0).get<double>(), r.at("goal").at(1).get<double>()};
          rr.scripted = r.at("scripted").get<bool>();
          log.robots.push_back(rr);
        }
        for (const auto& s : j.at("obstacles").at("segments"))
          log.segments.push_back({{s.at(0).get<double>(), s.at(1).get<double>()},
                                  {s.at(2).get<double>(), s.at(3).get<double>()}});
        for (const auto& d : j.at("obstacles").at("discs"))
          log.discs.push_back({{d.at(0).get<double>(), d.at(1).get<double>()},
                               d.at(2).get<double>()});
        have_header = true;
        continue;
      }
      ReplayFrame f;
      f.step = j.at("step").get<std::int64_t>();
      const auto& rs = j.at("robots");
      if (rs.size() != log.robots.size())
        fail(path, line_no, "record lists " + std::to_string(rs.size()) + " robots, header has " +
                                std::to_string(log.robots.size()));
      for (const auto& r : rs) {
        f.poses.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
        const auto code = r.at(3).get<std::string>();
        if (code.size() != 1) fail(path, line_no, "bad status code");
        f.status.push_back(status_from_code(code[0]));
      }
      if (!log.frames.empty() && f.step <= log.frames.back().step)
        fail(path, line_no, "step numbers must increase");
      log.frames.push_back(std::move(f));
    } catch (const json::exception& e) {
      fail(path, line_no, std::string("missing or mistyped field: ") + e.what());
    } catch (const ContractViolation& e) {
      fail(path, line_no, e.what());
    }
  }
  if (!have_header) throw ReplayError(path.string() + ": replay log is empty");
  if (log.frames.empty()) throw ReplayError(path.string() + ": replay log has no step records");
  return log;
}

std::vector<ReplayRobotSummary> summarize(const ReplayLog& log) {
  std::vector<ReplayRobotSummary> out(log.robots.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    s.straight_distance = (log.robots[i].goal - log.robots[i].start.position()).norm();
    bool ended = false;
    for (std::size_t k = 1; k < log.frames.size() && !ended; ++k) {
      s.path_length +=
          (log.frames[k].poses[i].position() - log.frames[k - 1].poses[i].position()).norm();
      if (log.frames[k].status[i] != RobotStatus::kActive) {
        s.outcome = log.frames[k].status[i];
        s.end_time = static_cast<double>(log.frames[k].step) * log.dt;
        ended = true;
      }
    }
    if (!ended) s.end_time = static_cast<double>(log.frames.back().step) * log.dt;
  }
  return out;
}

std::string format_summary(const ReplayLog& log) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %-9s %-8s %10s %10s %10s\n", "robot", "outcome",
                "role", "time_s", "path_m", "straight_m");
  os << buf;
  const auto sums = summarize(log);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const char* outcome = sums[i].outcome == RobotStatus::kArrived    ? "arrived"
                          : sums[i].outcome == RobotStatus::kCollided ? "collided"
                                                                      : "timeout";
    std::snprintf(buf, sizeof buf, "%-6zu %-9s %-8s %10.2f %10.3f %10.3f\n", i, outcome,
                  log.robots[i].scripted ? "scripted" : "policy", sums[i].end_time,
                  sums[i].path_length, sums[i].straight_distance);
    os << buf;
  }
  return os.str();
}

std::string render_svg(const ReplayLog& log) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto grow = [&](const Vec2& p, double pad) {
    lo_x = std::min(lo_x, p.x() - pad);
    lo_y = std::min(lo_y, p.y() - pad);
    hi_x = std::max(hi_x, p.x() + pad);
    hi_y = std::max(hi_y, p.y() + pad);
  };
  for (const auto& f : log.frames)
    for (std::size_t i = 0; i < f.poses.size(); ++i)
      grow(f.poses[i].position(), log.robots[i].radius);
  for (const auto& r : log.robots) grow(r.goal, r.radius);
  for (const auto& s : log.segments) {
    grow(s.a, 0.0);
    grow(s.b, 0.0);
  }
  for (const auto& d : log.discs) grow(d.center, d.radius);
  const double margin = 0.5;
  lo_x -= margin;
  lo_y -= margin;
  hi_x += margin;
  hi_y += margin;

  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  // y is flipped so the plot uses the usual upward axis.
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << lo_x << ' ' << -hi_y << ' '
     << (hi_x - lo_x) << ' ' << (hi_y - lo_y) << "\" width=\"800\" height=\""
     << static_cast<int>(800.0 * (hi_y - lo_y) / (hi_x - lo_x)) << "\">\n";
  os << "<rect x=\"" << lo_x << "\" y=\"" << -hi_y << "\" width=\"" << (hi_x - lo_x)
     << "\" height=\"" << (hi_y - lo_y) << "\" fill=\"white\"/>\n";
  for (const auto& s : log.segments)
    os << "<line x1=\"" << s.a.x() << "\" y1=\"" << -s.a.y() << "\" x2=\"" << s.b.x()
       << "\" y2=\"" << -s.b.y() << "\" stroke=\"black\" stroke-width=\"0.05\"/>\n";
  for (const auto& d : log.discs)
    os << "<circle cx=\"" << d.center.x() << "\" cy=\"" << -d.center.y() << "\" r=\""
       << d.radius << "\" fill=\"#555\"/>\n";
  const auto sums = summarize(log);
  for (std::size_t i = 0; i < log.robots.size(); ++i) {
    const char* color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    const auto& r = log.robots[i];
    os << "<polyline class=\"trajectory\" data-robot=\"" << i << "\" fill=\"none\" stroke=\""
       << color << "\" stroke-width=\"0.04\" points=\"";
    for (std::size_t k = 0; k < log.frames.size(); ++k) {
      const auto& p = log.frames[k].poses[i];
      os << (k ? " " : "") << p.x << ',' << -p.y;
      if (log.frames[k].status[i] != RobotStatus::kActive) break;
    }
    os << "\"/>\n";
    os << "<circle cx=\"" << r.start.x << "\" cy=\"" << -r.start.y << "\" r=\"" << r.radius
       << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"0.02\"/>\n";
    os << "<circle cx=\"" << r.goal.x() << "\" cy=\"" << -r.goal.y() << "\" r=\""
       << log.goal_radius << "\" fill=\"" << color << "\"/>\n";
    if (sums[i].outcome == RobotStatus::kCollided) {
      Pose end = log.frames.back().poses[i];
      for (const auto& f : log.frames)
        if (f.status[i] == RobotStatus::kCollided) {
          end = f.poses[i];
          break;
        }
      os << "<circle cx=\"" << end.x << "\" cy=\"" << -end.y << "\" r=\"" << r.radius
         << "\" fill=\"none\" stroke=\"red\" stroke-width=\"0.04\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mrca
