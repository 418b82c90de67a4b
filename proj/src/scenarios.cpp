#include "mrca/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>

#ifndef MRCA_DEFAULT_DATA_DIR
#define MRCA_DEFAULT_DATA_DIR "data/maps"
#endif

namespace mrca {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double heading_to(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  return std::atan2(d.y(), d.x());
}

double obstacle_clearance(const Vec2& p, const ObstacleSet& obs) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : obs.segments) best = std::min(best, point_segment_distance(p, s));
  for (const auto& d : obs.discs) best = std::min(best, (p - d.center).norm() - d.radius);
  return best;
}

bool clear_of(const Vec2& p, double r, const std::vector<Vec2>& others,
              const std::vector<double>& other_radii, double margin) {
  for (std::size_t i = 0; i < others.size(); ++i) {
    if ((p - others[i]).norm() <= r + other_radii[i] + margin) return false;
  }
  return true;
}

std::vector<Segment> rectangle(const Vec2& lo, const Vec2& hi) {
  const Vec2 a = lo, b(hi.x(), lo.y()), c = hi, d(lo.x(), hi.y());
  return {{a, b}, {b, c}, {c, d}, {d, a}};
}

RobotSpawn spawn(const Vec2& start, const Vec2& goal, double radius,
                 double v_max) {
  RobotSpawn s;
  s.start = {start.x(), start.y(), wrap_angle(heading_to(start, goal))};
  s.goal = goal;
  s.radius = radius;
  s.v_max = v_max;
  return s;
}

Vec2 sample_in(const Zone& z, double inset, std::mt19937_64& rng) {
  return {uniform(rng, z.lo.x() + inset, z.hi.x() - inset),
          uniform(rng, z.lo.y() + inset, z.hi.y() - inset)};
}

Zone parse_zone(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw ScenarioError("zone must be [xmin, ymin, xmax, ymax]");
  Zone z{{j[0].get<double>(), j[1].get<double>()},
         {j[2].get<double>(), j[3].get<double>()}};
  if (!(z.lo.x() < z.hi.x() && z.lo.y() < z.hi.y()))
    throw ScenarioError("zone has empty extent");
  return z;
}

json zone_json(const Zone& z) {
  return json::array({z.lo.x(), z.lo.y(), z.hi.x(), z.hi.y()});
}

}  // namespace

WorldState make_world(const ScenarioSpec& spec, const WorldConfig& cfg) {
  WorldState w;
  w.dt = cfg.dt;
  w.goal_radius = cfg.goal_radius;
  w.obstacles = spec.obstacles;
  w.robots.reserve(spec.robots.size());
  for (const auto& s : spec.robots) {
    RobotState r;
    r.pose = s.start;
    r.goal = s.goal;
    r.radius = s.radius;
    r.v_max = s.v_max;
    w.robots.push_back(r);
  }
  return w;
}

double min_circle_radius(int n, double robot_radius) {
  if (n < 2) return 0.0;
  return (2.0 * robot_radius + kPlacementMargin) / (2.0 * std::sin(kPi / n));
}

ScenarioSpec make_circle(int n, double radius, std::mt19937_64& rng,
                         const CircleOptions& opt) {
  if (n < 2) throw ScenarioError("circle scenario needs at least 2 robots");
  const double rmin = min_circle_radius(n, opt.robot_radius);
  if (radius < rmin) {
    throw ScenarioError("circle radius " + std::to_string(radius) +
                        " too small for " + std::to_string(n) +
                        " robots (need >= " + std::to_string(rmin) + ")");
  }
  const double offset = opt.random_rotation ? uniform(rng, -kPi, kPi) : 0.0;
  std::vector<double> angles;
  if (opt.even_spacing) {
    for (int i = 0; i < n; ++i) angles.push_back(offset + 2.0 * kPi * i / n);
  } else {
    // Angular gap equivalent to the body clearance at this radius.
    const double min_gap =
        2.0 * std::asin(std::min(1.0, (2.0 * opt.robot_radius + kPlacementMargin) /
                                          (2.0 * radius)));
    int attempts = 0;
    while (static_cast<int>(angles.size()) < n) {
      if (++attempts > kMaxSamplingAttempts)
        throw ScenarioError("circle: could not place robots with clearance");
      const double a = uniform(rng, -kPi, kPi);
      const bool ok = std::none_of(angles.begin(), angles.end(), [&](double b) {
        return std::abs(wrap_angle(a - b)) < min_gap;
      });
      if (ok) angles.push_back(a);
    }
  }
  ScenarioSpec spec;
  spec.name = "circle";
  for (double a : angles) {
    const Vec2 start(radius * std::cos(a), radius * std::sin(a));
    spec.robots.push_back(spawn(start, -start, opt.robot_radius, opt.v_max));
  }
  return spec;
}

ScenarioSpec make_random(int n, double arena, int obstacle_count,
                         std::mt19937_64& rng, const RandomOptions& opt) {
  ScenarioSpec spec;
  spec.name = "random";
  const double half = arena / 2.0;
  int attempts = 0;
  auto bump = [&] {
    if (++attempts > kMaxSamplingAttempts)
      throw ScenarioError("random scenario: sampling cap exceeded (arena too dense)");
  };

  for (int k = 0; k < obstacle_count; ++k) {
    if (k % 2 == 0) {
      const double r = uniform(rng, opt.obstacle_radius_min, opt.obstacle_radius_max);
      spec.obstacles.discs.push_back(
          {{uniform(rng, -half + r, half - r), uniform(rng, -half + r, half - r)}, r});
    } else {
      const double len = uniform(rng, opt.segment_length_min, opt.segment_length_max);
      const double ang = uniform(rng, -kPi, kPi);
      const Vec2 c(uniform(rng, -half + len / 2, half - len / 2),
                   uniform(rng, -half + len / 2, half - len / 2));
      const Vec2 d = 0.5 * len * Vec2(std::cos(ang), std::sin(ang));
      spec.obstacles.segments.push_back({c - d, c + d});
    }
  }

  const double r = opt.robot_radius;
  const double lim = half - r - kPlacementMargin;
  if (lim <= 0.0) throw ScenarioError("random scenario: arena too small");
  std::vector<Vec2> starts, goals;
  std::vector<double> radii;
  while (static_cast<int>(starts.size()) < n) {
    bump();
    const Vec2 s(uniform(rng, -lim, lim), uniform(rng, -lim, lim));
    if (obstacle_clearance(s, spec.obstacles) <= r + kPlacementMargin) continue;
    if (!clear_of(s, r, starts, radii, kPlacementMargin)) continue;
    Vec2 g;
    bool found = false;
    while (!found) {
      bump();
      g = Vec2(uniform(rng, -lim, lim), uniform(rng, -lim, lim));
      found = (g - s).norm() >= opt.min_goal_distance &&
              obstacle_clearance(g, spec.obstacles) > r + kPlacementMargin &&
              clear_of(g, r, goals, radii, kPlacementMargin);
    }
    starts.push_back(s);
    goals.push_back(g);
    radii.push_back(r);
  }
  for (int i = 0; i < n; ++i)
    spec.robots.push_back(spawn(starts[i], goals[i], r, opt.v_max));
  return spec;
}

GroupKind group_kind_from_string(const std::string& s) {
  if (s == "swap") return GroupKind::kSwap;
  if (s == "crossing") return GroupKind::kCrossing;
  if (s == "corridor") return GroupKind::kCorridor;
  throw ScenarioError("unknown group kind '" + s + "'");
}

std::string to_string(GroupKind k) {
  switch (k) {
    case GroupKind::kSwap:
      return "swap";
    case GroupKind::kCrossing:
      return "crossing";
    case GroupKind::kCorridor:
      return "corridor";
  }
  return "?";
}

ScenarioSpec make_group(GroupKind kind, int n_per_group, std::mt19937_64& rng,
                        const GroupOptions& opt) {
  if (n_per_group < 1) throw ScenarioError("group scenario needs >= 1 robot per group");
  ScenarioSpec spec;
  spec.name = to_string(kind);
  const int rows = std::min(n_per_group, 3);
  const double s = opt.spacing;
  const double half_sep = opt.separation / 2.0;
  // Jitter stays well inside the spacing slack so placements remain clear.
  const double jitter = 0.25 * (s - 2.0 * opt.robot_radius - kPlacementMargin);
  auto jit = [&] { return uniform(rng, -jitter, jitter); };

  // Grid slot k of a group: column along the travel axis, row across it.
  auto slot = [&](int k) {
    const int col = k / rows;
    const int row = k % rows;
    return std::pair<double, double>{half_sep + col * s,
                                     (row - (rows - 1) / 2.0) * s};
  };

  for (int k = 0; k < n_per_group; ++k) {
    const auto [along, across] = slot(k);
    const Vec2 start(-along + jit(), across + jit());
    const Vec2 goal(along, across);
    spec.robots.push_back(spawn(start, goal, opt.robot_radius, opt.v_max));
  }
  for (int k = 0; k < n_per_group; ++k) {
    const auto [along, across] = slot(k);
    Vec2 start, goal;
    if (kind == GroupKind::kCrossing) {
      start = Vec2(across + jit(), -along + jit());
      goal = Vec2(across, along);
    } else {
      start = Vec2(along + jit(), -across + jit());
      goal = Vec2(-along, -across);
    }
    spec.robots.push_back(spawn(start, goal, opt.robot_radius, opt.v_max));
  }

  if (kind == GroupKind::kCorridor) {
    const double w = opt.corridor_width / 2.0;
    const int cols = (n_per_group + rows - 1) / rows;
    const double len = half_sep + cols * s + 1.0;
    spec.obstacles.segments.push_back({{-len, w}, {len, w}});
    spec.obstacles.segments.push_back({{-len, -w}, {len, -w}});
    // Two staggered blocks that force the groups to interleave.
    const double b = 0.3;
    for (const auto& seg : rectangle({-1.0 - b, 0.55 * w - b}, {-1.0 + b, 0.55 * w + b}))
      spec.obstacles.segments.push_back(seg);
    for (const auto& seg : rectangle({1.0 - b, -0.55 * w - b}, {1.0 + b, -0.55 * w + b}))
      spec.obstacles.segments.push_back(seg);
  }
  return spec;
}

bool Zone::contains(const Vec2& p) const {
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
}

ScenarioMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open map file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ScenarioError("malformed map file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("schema").get<int>() != kMapSchemaVersion)
      throw ScenarioError("unsupported map schema in " + path.string());
    ScenarioMap m;
    m.name = j.at("name").get<std::string>();
    m.archetype = j.value("archetype", 0);
    for (const auto& s : j.value("segments", json::array())) {
      m.obstacles.segments.push_back(
          {{s.at(0).get<double>(), s.at(1).get<double>()},
           {s.at(2).get<double>(), s.at(3).get<double>()}});
    }
    for (const auto& d : j.value("discs", json::array())) {
      m.obstacles.discs.push_back(
          {{d.at(0).get<double>(), d.at(1).get<double>()}, d.at(2).get<double>()});
    }
    for (const auto& z : j.at("start_zones")) m.start_zones.push_back(parse_zone(z));
    for (const auto& z : j.at("goal_zones")) m.goal_zones.push_back(parse_zone(z));
    m.robot_count = j.value("robot_count", 8);
    m.radii = j.value("radii", std::vector<double>{0.2});
    if (m.start_zones.empty() || m.start_zones.size() != m.goal_zones.size())
      throw ScenarioError("map " + path.string() +
                          ": start_zones and goal_zones must pair up");
    m.obstacles.validate();
    return m;
  } catch (const json::exception& e) {
    throw ScenarioError("map file " + path.string() + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw ScenarioError("map file " + path.string() + ": " + e.what());
  }
}

void save_map(const ScenarioMap& map, const std::filesystem::path& path) {
  json j;
  j["schema"] = kMapSchemaVersion;
  j["name"] = map.name;
  j["archetype"] = map.archetype;
  j["segments"] = json::array();
  for (const auto& s : map.obstacles.segments)
    j["segments"].push_back({s.a.x(), s.a.y(), s.b.x(), s.b.y()});
  j["discs"] = json::array();
  for (const auto& d : map.obstacles.discs)
    j["discs"].push_back({d.center.x(), d.center.y(), d.radius});
  j["start_zones"] = json::array();
  for (const auto& z : map.start_zones) j["start_zones"].push_back(zone_json(z));
  j["goal_zones"] = json::array();
  for (const auto& z : map.goal_zones) j["goal_zones"].push_back(zone_json(z));
  j["robot_count"] = map.robot_count;
  j["radii"] = map.radii;
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write map file " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path default_map_dir() {
  if (const char* env = std::getenv("MRCA_DATA_DIR"); env && *env)
    return std::filesystem::path(env);
  return std::filesystem::path(MRCA_DEFAULT_DATA_DIR);
}

ScenarioSpec sample_from_map(const ScenarioMap& map, int n, std::mt19937_64& rng,
                             double robot_radius, double v_max) {
  ScenarioSpec spec;
  spec.name = map.name;
  spec.obstacles = map.obstacles;
  const double inset = robot_radius + kPlacementMargin;
  std::vector<Vec2> starts, goals;
  std::vector<double> radii;
  int attempts = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t pair = static_cast<std::size_t>(i) % map.start_zones.size();
    Vec2 s, g;
    for (;;) {
      if (++attempts > kMaxSamplingAttempts)
        throw ScenarioError("map " + map.name + ": could not place " +
                            std::to_string(n) + " robots in its zones");
      s = sample_in(map.start_zones[pair], inset, rng);
      if (obstacle_clearance(s, map.obstacles) > inset &&
          clear_of(s, robot_radius, starts, radii, kPlacementMargin))
        break;
    }
    for (;;) {
      if (++attempts > kMaxSamplingAttempts)
        throw ScenarioError("map " + map.name + ": could not place goals");
      g = sample_in(map.goal_zones[pair], inset, rng);
      if (obstacle_clearance(g, map.obstacles) > inset &&
          clear_of(g, robot_radius, goals, radii, kPlacementMargin))
        break;
    }
    starts.push_back(s);
    goals.push_back(g);
    radii.push_back(robot_radius);
    spec.robots.push_back(spawn(s, g, robot_radius, v_max));
  }
  return spec;
}

namespace {

const char* archetype_file(int id) {
  switch (id) {
    case 1:
      return "archetype1_corridor.json";
    case 2:
      return "archetype2_cross_corridors.json";
    case 3:
      return "archetype3_box_room.json";
    case 5:
      return "archetype5_maze_blocks.json";
    case 6:
      return "archetype6_room_bars.json";
    default:
      return nullptr;
  }
}

}  // namespace

ScenarioSpec make_archetype(int id, const ArchetypeParams& params,
                            std::mt19937_64& rng) {
  if (id < 1 || id > 7) throw ScenarioError("archetype id must be in 1..7");
  if (id == 4) {
    const double rmin = std::max(params.circle_radius_min,
                                 min_circle_radius(params.robot_count, params.robot_radius));
    const double radius = uniform(rng, rmin, std::max(rmin, params.circle_radius_max));
    CircleOptions opt;
    opt.even_spacing = false;
    opt.robot_radius = params.robot_radius;
    opt.v_max = params.v_max;
    auto spec = make_circle(params.robot_count, radius, rng, opt);
    spec.name = "archetype4_circle";
    return spec;
  }
  if (id == 7) {
    RandomOptions opt;
    opt.robot_radius = params.robot_radius;
    opt.v_max = params.v_max;
    auto spec = make_random(params.robot_count, params.random_arena,
                            params.random_obstacles, rng, opt);
    spec.name = "archetype7_random";
    return spec;
  }
  const auto dir = params.map_dir.empty() ? default_map_dir() : params.map_dir;
  const auto map = load_map(dir / archetype_file(id));
  return sample_from_map(map, params.robot_count, rng, params.robot_radius,
                         params.v_max);
}

ScenarioSpec make_noncooperative(std::mt19937_64& rng, double robot_radius) {
  CircleOptions opt;
  opt.robot_radius = robot_radius;
  opt.random_rotation = true;
  auto spec = make_circle(6, 3.0, rng, opt);
  spec.name = "noncooperative";
  // Two movers crossing the circle on parallel lanes in opposite directions.
  const double lane = uniform(rng, 0.6, 1.2);
  for (int k = 0; k < 2; ++k) {
    const double dir = k == 0 ? 1.0 : -1.0;
    const Vec2 start(-6.0 * dir, lane * dir);
    const Vec2 goal(6.0 * dir, lane * dir);
    RobotSpawn s = spawn(start, goal, robot_radius, 1.0);
    s.scripted = true;
    s.scripted_action = {1.0, 0.0};
    spec.robots.push_back(s);
  }
  return spec;
}

ScenarioSpec make_heterogeneous(int n, double radius, std::mt19937_64& rng) {
  static constexpr std::array<double, 3> kRadii{0.15, 0.2, 0.3};
  CircleOptions opt;
  opt.robot_radius = kRadii.back();
  opt.random_rotation = true;
  auto spec = make_circle(n, radius, rng, opt);
  spec.name = "heterogeneous";
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kRadii.size()) - 1);
  for (auto& r : spec.robots) r.radius = kRadii[pick(rng)];
  return spec;
}

const std::vector<std::string>& known_families() {
  static const std::vector<std::string> names{
      "circle",   "random",        "swap",           "crossing",
      "corridor", "heterogeneous", "noncooperative", "archetype"};
  return names;
}

ScenarioSpec generate(const FamilyParams& fp, std::mt19937_64& rng) {
  const std::uint64_t seed = rng();
  std::mt19937_64 local(seed);
  ScenarioSpec spec;
  if (fp.family == "circle") {
    CircleOptions opt;
    opt.even_spacing = fp.even_spacing;
    opt.random_rotation = fp.random_rotation;
    opt.robot_radius = fp.robot_radius;
    opt.v_max = fp.v_max;
    const double radius =
        fp.radius_jitter > 0.0 ? uniform(local, fp.radius, fp.radius + fp.radius_jitter)
                               : fp.radius;
    spec = make_circle(fp.n, radius, local, opt);
  } else if (fp.family == "random") {
    RandomOptions opt;
    opt.robot_radius = fp.robot_radius;
    opt.v_max = fp.v_max;
    spec = make_random(fp.n, fp.arena, fp.obstacles, local, opt);
  } else if (fp.family == "swap" || fp.family == "crossing" ||
             fp.family == "corridor") {
    GroupOptions opt;
    opt.robot_radius = fp.robot_radius;
    opt.v_max = fp.v_max;
    spec = make_group(group_kind_from_string(fp.family), fp.n, local, opt);
  } else if (fp.family == "heterogeneous") {
    spec = make_heterogeneous(fp.n, fp.radius, local);
  } else if (fp.family == "noncooperative") {
    spec = make_noncooperative(local, fp.robot_radius);
  } else if (fp.family == "archetype") {
    ArchetypeParams ap;
    ap.robot_count = fp.n;
    ap.robot_radius = fp.robot_radius;
    ap.v_max = fp.v_max;
    ap.random_arena = fp.arena;
    ap.random_obstacles = fp.obstacles;
    spec = make_archetype(fp.archetype, ap, local);
  } else {
    std::string valid;
    for (const auto& f : known_families()) valid += (valid.empty() ? "" : ", ") + f;
    throw ScenarioError("unknown scenario family '" + fp.family +
                        "' (valid: " + valid + ")");
  }
  spec.seed = seed;
  return spec;
}

bool initial_state_is_clear(const ScenarioSpec& spec, double margin) {
  const auto& rs = spec.robots;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const Vec2 p = rs[i].start.position();
    if (obstacle_clearance(p, spec.obstacles) <= rs[i].radius + margin) return false;
    for (std::size_t j = i + 1; j < rs.size(); ++j) {
      if ((p - rs[j].start.position()).norm() <= rs[i].radius + rs[j].radius + margin)
        return false;
    }
  }
  return true;
}

CurriculumSpec default_curriculum() {
  CurriculumSpec c;
  FamilyParams empty_random;
  empty_random.family = "random";
  empty_random.arena = 10.0;
  empty_random.obstacles = 0;
  c.stage1.scenarios = {empty_random};
  c.stage1.robots = 8;
  c.stage1.lr_theta = 5e-5;
  for (int id = 1; id <= 7; ++id) {
    FamilyParams fp;
    fp.family = "archetype";
    fp.archetype = id;
    fp.arena = 10.0;
    fp.obstacles = 6;
    c.stage2.scenarios.push_back(fp);
  }
  c.stage2.robots = 16;
  c.stage2.instances = 4;
  c.stage2.lr_theta = 2e-5;
  return c;
}

StageDirective curriculum_next(const CurriculumSpec& curriculum,
                               const TrainingStats& stats) {
  if (stats.stage >= 2 || !curriculum.has_stage2()) return StageDirective::kStay;
  if (stats.rolling_success && *stats.rolling_success >= curriculum.switch_success)
    return StageDirective::kEnterStage2;
  if (curriculum.stage1_iteration_cap > 0 &&
      stats.iteration >= curriculum.stage1_iteration_cap)
    return StageDirective::kForceStage2;
  return StageDirective::kStay;
}

}  // namespace mrca
