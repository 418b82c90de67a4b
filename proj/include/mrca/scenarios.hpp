#pragma once

#include "mrca/world.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mrca {

struct RobotSpawn {
  Pose start;
  Vec2 goal = Vec2::Zero();
  double radius = 0.2;
  double v_max = 1.0;
  /// Scripted movers replay `scripted_action` forever and never query a policy.
  bool scripted = false;
  Action scripted_action;
};

/// A concrete, fully sampled scenario instance.
struct ScenarioSpec {
  std::string name;
  ObstacleSet obstacles;
  std::vector<RobotSpawn> robots;
  std::uint64_t seed = 0;
};

/// Clearance added on top of body radii whenever placements are sampled.
inline constexpr double kPlacementMargin = 0.1;
inline constexpr int kMaxSamplingAttempts = 10000;

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

WorldState make_world(const ScenarioSpec& spec, const WorldConfig& cfg = {});

struct CircleOptions {
  bool even_spacing = true;
  double robot_radius = 0.2;
  double v_max = 1.0;
  /// Rotates the whole layout by a random angle; leaves geometry unchanged.
  bool random_rotation = false;
};

/// Smallest circle radius that keeps n evenly spaced bodies separated by the
/// placement margin along the arc.
double min_circle_radius(int n, double robot_radius);

/// n robots on a circle centered at the origin, goals antipodal, headings
/// toward the center.
ScenarioSpec make_circle(int n, double radius, std::mt19937_64& rng,
                         const CircleOptions& opt = {});

struct RandomOptions {
  double robot_radius = 0.2;
  double v_max = 1.0;
  double min_goal_distance = 1.0;
  double obstacle_radius_min = 0.2;
  double obstacle_radius_max = 0.6;
  double segment_length_min = 0.5;
  double segment_length_max = 1.5;
};

/// Square arena of side `arena` centered on the origin. Half of the
/// obstacles are discs, the rest short segments.
ScenarioSpec make_random(int n, double arena, int obstacle_count,
                         std::mt19937_64& rng, const RandomOptions& opt = {});

enum class GroupKind { kSwap, kCrossing, kCorridor };

GroupKind group_kind_from_string(const std::string& s);
std::string to_string(GroupKind k);

struct GroupOptions {
  double robot_radius = 0.2;
  double v_max = 1.0;
  double spacing = 0.8;
  double separation = 8.0;
  double corridor_width = 3.0;
};

ScenarioSpec make_group(GroupKind kind, int n_per_group, std::mt19937_64& rng,
                        const GroupOptions& opt = {});

/// Axis-aligned rectangle used for start and goal zones.
struct Zone {
  Vec2 lo;
  Vec2 hi;
  bool contains(const Vec2& p) const;
};

/// Obstacle map with paired start/goal zones loaded from a map file.
struct ScenarioMap {
  std::string name;
  int archetype = 0;
  ObstacleSet obstacles;
  std::vector<Zone> start_zones;
  std::vector<Zone> goal_zones;
  int robot_count = 0;
  std::vector<double> radii;
};

inline constexpr int kMapSchemaVersion = 1;

ScenarioMap load_map(const std::filesystem::path& path);
void save_map(const ScenarioMap& map, const std::filesystem::path& path);

/// Directory holding the bundled maps. MRCA_DATA_DIR overrides the build-time
/// default.
std::filesystem::path default_map_dir();

/// Samples starts and goals inside the map's zones (zone pair chosen round
/// robin by robot index).
ScenarioSpec sample_from_map(const ScenarioMap& map, int n, std::mt19937_64& rng,
                             double robot_radius = 0.2, double v_max = 1.0);

struct ArchetypeParams {
  int robot_count = 8;
  double robot_radius = 0.2;
  double v_max = 1.0;
  double circle_radius_min = 2.5;
  double circle_radius_max = 5.0;
  double random_arena = 10.0;
  int random_obstacles = 6;
  std::filesystem::path map_dir;  // empty -> default_map_dir()
};

/// Training archetypes 1..7. 4 is the circle and 7 the random world; the
/// others come from bundled map files.
ScenarioSpec make_archetype(int id, const ArchetypeParams& params,
                            std::mt19937_64& rng);

/// Named family with parameters, resolvable to a concrete ScenarioSpec.
struct FamilyParams {
  std::string family = "circle";  // circle|random|swap|crossing|corridor|archetype|heterogeneous|noncooperative
  int n = 4;
  double radius = 2.5;
  double arena = 10.0;
  int obstacles = 0;
  int archetype = 7;
  bool even_spacing = true;
  bool random_rotation = false;
  double robot_radius = 0.2;
  double v_max = 1.0;
  double radius_jitter = 0.0;  // circle radius drawn from [radius, radius + jitter]
};

const std::vector<std::string>& known_families();
ScenarioSpec generate(const FamilyParams& fp, std::mt19937_64& rng);

/// Six policy robots on a circle plus two straight-line movers crossing it.
ScenarioSpec make_noncooperative(std::mt19937_64& rng, double robot_radius = 0.2);
/// Circle whose radii are drawn from {0.15, 0.2, 0.3}.
ScenarioSpec make_heterogeneous(int n, double radius, std::mt19937_64& rng);

/// Initial placements are pairwise clear and outside obstacles.
bool initial_state_is_clear(const ScenarioSpec& spec, double margin = 0.0);

// Curriculum -------------------------------------------------------------

struct CurriculumStage {
  std::vector<FamilyParams> scenarios;
  int robots = 8;     // total across instances
  int instances = 1;  // concurrent scenario worlds
  double lr_theta = 5e-5;
};

struct CurriculumSpec {
  CurriculumStage stage1;
  CurriculumStage stage2;
  double switch_success = 0.9;
  int success_window = 50;
  int stage1_iteration_cap = 300;  // <= 0 disables the forced switch

  /// Stage 2 exists only when it lists scenarios.
  bool has_stage2() const { return !stage2.scenarios.empty(); }
};

/// Desk-scale default: random-empty worlds, then every archetype.
CurriculumSpec default_curriculum();

struct TrainingStats {
  int stage = 1;
  int iteration = 0;
  /// Fraction of arrivals over the most recent `success_window` episodes;
  /// nullopt until that many robot-episodes have finished.
  std::optional<double> rolling_success;
};

enum class StageDirective { kStay, kEnterStage2, kForceStage2 };

StageDirective curriculum_next(const CurriculumSpec& curriculum,
                               const TrainingStats& stats);

}  // namespace mrca
