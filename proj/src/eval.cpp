#include "mrca/eval.hpp"

#include "mrca/gaussian.hpp"
#include "mrca/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mrca {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void GoStraightPolicy::act(const WorldState& world, const std::vector<std::size_t>& robots,
                           std::vector<ScanHistory>&, std::mt19937_64&,
                           std::vector<Action>& actions) const {
  for (std::size_t i : robots) {
    const RobotState& r = world.robots[i];
    const Vec2 goal = relative_goal_polar(r);
    const double dist = goal[0], angle = goal[1];
    Action a;
    a.w = std::clamp(turn_gain_ * angle, -w_max_, w_max_);
    a.v = std::min(r.v_max * std::max(0.0, std::cos(angle)), dist / world.dt);
    actions[i] = clamp_action(a, r.v_max, w_max_);
  }
}

NetworkPolicy::NetworkPolicy(PolicyNet<TrainScalar> net, RunningNormalizer normalizer,
                             bool deterministic, double w_max)
    : net_(std::move(net)),
      normalizer_(normalizer),
      deterministic_(deterministic),
      w_max_(w_max) {}

std::unique_ptr<NetworkPolicy> NetworkPolicy::from_checkpoint(
    const std::filesystem::path& path, bool deterministic) {
  Checkpoint c = load_checkpoint(path);
  double w_max = 1.0;
  if (c.config.contains("world") && c.config["world"].contains("w_max"))
    w_max = c.config["world"]["w_max"].get<double>();
  return std::make_unique<NetworkPolicy>(std::move(c.policy), c.normalizer,
                                         deterministic, w_max);
}

void NetworkPolicy::act(const WorldState& world, const std::vector<std::size_t>& robots,
                        std::vector<ScanHistory>& histories, std::mt19937_64& rng,
                        std::vector<Action>& actions) const {
  if (robots.empty()) return;
  MatrixX<TrainScalar> obs(kObsDim, static_cast<Eigen::Index>(robots.size()));
  for (std::size_t k = 0; k < robots.size(); ++k) {
    const auto stack = assemble_observation(world, robots[k], histories[robots[k]]);
    obs.col(static_cast<Eigen::Index>(k)) =
        normalize(stack, normalizer_).cast<TrainScalar>();
  }
  const auto out = policy_forward(net_, obs);
  const Eigen::Vector2d logstd = out.logstd.cast<double>();
  for (std::size_t k = 0; k < robots.size(); ++k) {
    const RobotState& r = world.robots[robots[k]];
    const Eigen::Vector2d mean = out.mean.col(static_cast<Eigen::Index>(k)).cast<double>();
    if (deterministic_) {
      actions[robots[k]] = clamp_action({mean[0], mean[1]}, r.v_max, w_max_);
    } else {
      actions[robots[k]] = sample_action(mean, logstd, rng, r.v_max, w_max_).action;
    }
  }
}

// Replay ---------------------------------------------------------------------

void ReplayWriter::header(const ScenarioSpec& spec, const WorldState& world) {
  ojson h;
  h["schema"] = kReplaySchemaVersion;
  h["scenario"] = spec.name;
  h["seed"] = spec.seed;
  h["dt"] = world.dt;
  h["goal_radius"] = world.goal_radius;
  ojson robots = ojson::array();
  for (std::size_t i = 0; i < spec.robots.size(); ++i) {
    const auto& s = spec.robots[i];
    robots.push_back({{"radius", s.radius},
                      {"start", {s.start.x, s.start.y, s.start.theta}},
                      {"goal", {s.goal.x(), s.goal.y()}},
                      {"scripted", s.scripted}});
  }
  h["robots"] = robots;
  ojson obstacles;
  obstacles["segments"] = ojson::array();
  for (const auto& s : spec.obstacles.segments)
    obstacles["segments"].push_back({s.a.x(), s.a.y(), s.b.x(), s.b.y()});
  obstacles["discs"] = ojson::array();
  for (const auto& d : spec.obstacles.discs)
    obstacles["discs"].push_back({d.center.x(), d.center.y(), d.radius});
  h["obstacles"] = obstacles;
  out_ << h.dump() << '\n';
  step(world);
}

void ReplayWriter::step(const WorldState& world) {
  ojson rec;
  rec["step"] = world.step;
  ojson poses = ojson::array();
  for (const auto& r : world.robots)
    poses.push_back({r.pose.x, r.pose.y, r.pose.theta, std::string(1, status_code(r.status))});
  rec["robots"] = poses;
  out_ << rec.dump() << '\n';
  out_.flush();
}

// Episodes -------------------------------------------------------------------

double default_time_limit(std::size_t robots) { return robots <= 20 ? 60.0 : 120.0; }

EpisodeResult run_episode(const EvalPolicy& policy, const ScenarioSpec& spec,
                          double time_limit, std::uint64_t seed, ReplayWriter* replay,
                          const WorldConfig& world_cfg) {
  WorldState world = make_world(spec, world_cfg);
  const std::size_t n = world.robots.size();
  std::mt19937_64 rng(seed);
  std::vector<ScanHistory> histories(n);
  std::vector<Action> actions(n);
  EpisodeResult res;
  res.scenario = spec.name;
  res.seed = seed;
  res.obstacle_free = spec.obstacles.empty();
  res.robots.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = res.robots[i];
    o.scripted = spec.robots[i].scripted;
    o.straight_distance = (spec.robots[i].goal - spec.robots[i].start.position()).norm();
    o.lower_bound_distance = std::max(0.0, o.straight_distance - world.goal_radius);
    o.v_max = spec.robots[i].v_max;
  }
  if (replay) replay->header(spec, world);

  const auto max_steps = static_cast<std::int64_t>(std::llround(time_limit / world.dt));
  std::vector<std::size_t> driven;
  while (world.step < max_steps) {
    driven.clear();
    bool pending = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!world.robots[i].active()) continue;
      if (spec.robots[i].scripted) {
        actions[i] = spec.robots[i].scripted_action;
      } else {
        driven.push_back(i);
        pending = true;
      }
    }
    if (!pending) break;
    policy.act(world, driven, histories, rng, actions);
    WorldState next = advance_world(world, actions);
    for (std::size_t i = 0; i < n; ++i) {
      if (!world.robots[i].active()) continue;
      res.robots[i].path_length +=
          (next.robots[i].pose.position() - world.robots[i].pose.position()).norm();
      if (next.robots[i].status == RobotStatus::kArrived)
        res.robots[i].travel_time = next.time;
    }
    world = std::move(next);
    if (replay) replay->step(world);
  }
  for (std::size_t i = 0; i < n; ++i) res.robots[i].status = world.robots[i].status;
  res.steps = world.step;
  return res;
}

// Metrics --------------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.count = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return m;
}

namespace {

template <typename F>
MeanStd over_arrived(const std::vector<RobotOutcome>& robots, F f) {
  std::vector<double> xs;
  for (const auto& r : robots)
    if (!r.scripted && r.status == RobotStatus::kArrived) xs.push_back(f(r));
  return mean_std(xs);
}

}  // namespace

MeanStd extra_time(const std::vector<RobotOutcome>& robots) {
  return over_arrived(robots, [](const RobotOutcome& r) {
    return r.travel_time - r.lower_bound_distance / r.v_max;
  });
}

MeanStd extra_distance(const std::vector<RobotOutcome>& robots) {
  return over_arrived(robots, [](const RobotOutcome& r) {
    return r.path_length - r.lower_bound_distance;
  });
}

MeanStd average_speed(const std::vector<RobotOutcome>& robots) {
  return over_arrived(robots, [](const RobotOutcome& r) {
    return r.travel_time > 0.0 ? r.path_length / r.travel_time : 0.0;
  });
}

MetricsRecord aggregate(const std::string& scenario,
                        const std::vector<EpisodeResult>& episodes) {
  MetricsRecord m;
  m.scenario = scenario;
  m.trials = static_cast<int>(episodes.size());
  std::vector<RobotOutcome> all;
  bool obstacle_free = true;
  for (const auto& e : episodes) {
    obstacle_free = obstacle_free && e.obstacle_free;
    for (const auto& r : e.robots) {
      if (r.scripted) continue;
      all.push_back(r);
      ++m.robots;
      switch (r.status) {
        case RobotStatus::kArrived: ++m.arrivals; break;
        case RobotStatus::kCollided: ++m.collisions; break;
        case RobotStatus::kActive: ++m.timeouts; break;
      }
    }
  }
  m.success_rate = m.robots ? static_cast<double>(m.arrivals) / static_cast<double>(m.robots) : 0.0;
  m.extra_time = extra_time(all);
  if (obstacle_free) m.extra_distance = extra_distance(all);
  m.average_speed = average_speed(all);
  return m;
}

namespace {

ojson stat_json(const MeanStd& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

}  // namespace

ojson to_json(const MetricsRecord& m) {
  ojson j;
  j["scenario"] = m.scenario;
  j["trials"] = m.trials;
  j["robots"] = m.robots;
  j["arrivals"] = m.arrivals;
  j["collisions"] = m.collisions;
  j["timeouts"] = m.timeouts;
  j["success_rate"] = m.success_rate;
  j["extra_time"] = stat_json(m.extra_time);
  j["extra_distance"] = m.extra_distance ? stat_json(*m.extra_distance) : ojson(nullptr);
  j["average_speed"] = stat_json(m.average_speed);
  j["inclusion"] = kInclusionRule;
  return j;
}

ojson to_json(const EpisodeResult& e, int trial) {
  ojson j;
  j["trial"] = trial;
  j["seed"] = e.seed;
  j["scenario"] = e.scenario;
  j["steps"] = e.steps;
  ojson robots = ojson::array();
  for (const auto& r : e.robots) {
    robots.push_back({{"status", std::string(1, status_code(r.status))},
                      {"scripted", r.scripted},
                      {"travel_time", r.travel_time},
                      {"path_length", r.path_length},
                      {"straight_distance", r.straight_distance}});
  }
  j["robots"] = robots;
  return j;
}

std::string format_report(const MetricsRecord& m) {
  char buf[512];
  std::string ed = "n/a (obstacles present)";
  if (m.extra_distance) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.3f / %.3f", m.extra_distance->mean, m.extra_distance->std);
    ed = tmp;
  }
  std::snprintf(buf, sizeof buf,
                "scenario=%s trials=%d robots=%zu success_rate=%.3f "
                "(arrived %zu, collided %zu, timeout %zu) extra_time=%.3f / %.3f s "
                "extra_distance=%s m average_speed=%.3f / %.3f m/s [%s]",
                m.scenario.c_str(), m.trials, m.robots, m.success_rate, m.arrivals,
                m.collisions, m.timeouts, m.extra_time.mean, m.extra_time.std, ed.c_str(),
                m.average_speed.mean, m.average_speed.std, kInclusionRule);
  return buf;
}

MetricsRecord evaluate(const EvalPolicy& policy, const FamilyParams& family,
                       const EvalOptions& opt, std::vector<EpisodeResult>* episodes) {
  if (opt.trials < 1) throw ContractViolation("evaluate: trials must be >= 1");
  std::vector<EpisodeResult> results(static_cast<std::size_t>(opt.trials));
  std::vector<ScenarioSpec> specs(results.size());
  // Scenario sampling is cheap and kept serial so failures surface in order.
  for (std::size_t k = 0; k < specs.size(); ++k) {
    std::mt19937_64 rng(derive_seed(opt.seed, k));
    specs[k] = generate(family, rng);
  }
  std::ofstream replay_file;
  std::unique_ptr<ReplayWriter> writer;
  if (!opt.replay_out.empty()) {
    replay_file.open(opt.replay_out);
    if (!replay_file)
      throw std::runtime_error("cannot write replay log '" + opt.replay_out.string() + "'");
    writer = std::make_unique<ReplayWriter>(replay_file);
  }
  parallel_for(
      results.size(),
      [&](std::size_t k) {
        const double limit =
            opt.time_limit > 0.0 ? opt.time_limit : default_time_limit(specs[k].robots.size());
        results[k] = run_episode(policy, specs[k], limit, derive_seed(opt.seed ^ 0xe7a1ULL, k),
                                 k == 0 ? writer.get() : nullptr);
      },
      opt.workers);

  if (!opt.raw_out.empty()) {
    std::ofstream raw(opt.raw_out);
    if (!raw) throw std::runtime_error("cannot write raw trials '" + opt.raw_out.string() + "'");
    for (std::size_t k = 0; k < results.size(); ++k)
      raw << to_json(results[k], static_cast<int>(k)).dump() << '\n';
  }
  std::string name = family.family;
  if (family.family == "circle" || family.family == "heterogeneous")
    name += "-" + std::to_string(family.n);
  MetricsRecord m = aggregate(name, results);
  if (episodes) *episodes = std::move(results);
  return m;
}

std::vector<FamilyParams> generalization_families() {
  FamilyParams het;
  het.family = "heterogeneous";
  het.n = 8;
  het.radius = 4.0;
  FamilyParams nonco;
  nonco.family = "noncooperative";
  FamilyParams big;
  big.family = "circle";
  big.n = 100;
  big.radius = 12.0;
  return {het, nonco, big};
}

}  // namespace mrca
