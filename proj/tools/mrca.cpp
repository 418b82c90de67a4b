// mrca: train, eval, replay, gradcheck, scenario-preview.
//
// Exit codes: 0 success, 1 contract or tolerance failure, 2 usage error.

#include "mrca/checkpoint.hpp"
#include "mrca/config.hpp"
#include "mrca/eval.hpp"
#include "mrca/gradcheck.hpp"
#include "mrca/replay.hpp"
#include "mrca/scenarios.hpp"
#include "mrca/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mrca;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct ScenarioFlags {
  std::string family = "circle";
  int n = 4;
  double radius = 2.5;
  double arena = 10.0;
  int obstacles = 0;
  int archetype = 7;
  bool random_spacing = false;
  bool rotate = false;

  void add(CLI::App* app) {
    app->add_option("--family", family, "Scenario family");
    app->add_option("--n", n, "Robot count (robots per group for swap/crossing/corridor)");
    app->add_option("--radius", radius, "Circle radius in m");
    app->add_option("--arena", arena, "Random-world arena side in m");
    app->add_option("--obstacles", obstacles, "Random-world obstacle count");
    app->add_option("--archetype", archetype, "Training archetype id 1..7");
    app->add_flag("--random-spacing", random_spacing, "Random angular spacing on the circle");
    app->add_flag("--rotate", rotate, "Random rotation of the circle layout");
  }

  FamilyParams params() const {
    FamilyParams fp;
    fp.family = family;
    fp.n = n;
    fp.radius = radius;
    fp.arena = arena;
    fp.obstacles = obstacles;
    fp.archetype = archetype;
    fp.even_spacing = !random_spacing;
    fp.random_rotation = rotate;
    return fp;
  }
};

bool known_family(const std::string& f) {
  for (const auto& k : known_families())
    if (k == f) return true;
  return false;
}

int unknown_family(const std::string& f) {
  std::cerr << "error: unknown scenario family '" << f << "'. Valid families:";
  for (const auto& k : known_families()) std::cerr << ' ' << k;
  std::cerr << '\n';
  return kUsage;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized multi-robot collision avoidance: training and evaluation"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run PPO training");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<int> stage2_robots;
  std::optional<int> iterations;
  std::string resume;
  bool quiet = false;
  train->add_option("--config", config_path, "Run config (JSON)");
  train->add_option("--seed", seed, "Global seed");
  train->add_option("--out", out_dir, "Output directory (default: run.out)");
  train->add_option("--set", overrides, "Dotted override, e.g. train.T_max=2000")
      ->take_all();
  train->add_option("--stage2-robots", stage2_robots, "Total robots in stage 2");
  train->add_option("--iterations", iterations, "Iteration budget");
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_flag("--quiet", quiet, "No per-iteration progress lines");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a policy over a scenario family");
  std::string policy_kind = "checkpoint";
  std::string checkpoint;
  int trials = 50;
  std::uint64_t eval_seed = 1;
  std::string eval_out;
  bool sample = false;
  bool suite = false;
  double time_limit = -1.0;
  ScenarioFlags eval_scen;
  eval->add_option("--policy", policy_kind, "checkpoint | baseline-straight")
      ->check(CLI::IsMember({"checkpoint", "baseline-straight"}));
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file");
  eval->add_option("--trials", trials, "Repeats with distinct seeds")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--out", eval_out, "Directory for report.jsonl, trials.jsonl, replay.jsonl");
  eval->add_flag("--sample", sample, "Sample actions instead of using the Gaussian mean");
  eval->add_flag("--generalization", suite, "Run the generalization suite instead of --family");
  eval->add_option("--time-limit", time_limit, "Episode limit in simulated seconds");
  eval_scen.add(eval);

  // replay
  auto* replay = app.add_subcommand("replay", "Render a replay log to SVG plus a summary table");
  std::string replay_in;
  std::string replay_out;
  replay->add_option("log", replay_in, "Replay log")->required();
  replay->add_option("--out", replay_out, "Output directory")->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of both networks");
  GradcheckOptions gopt;
  grad->add_option("--seed", gopt.seed, "Seed");
  grad->add_option("--draws", gopt.draws, "Random draws")->check(CLI::PositiveNumber);
  grad->add_option("--corrupt", gopt.corrupt, "Scale error injected into fc2.weight")
      ->group("");

  // scenario-preview
  auto* preview = app.add_subcommand("scenario-preview", "Sample a scenario and draw it");
  ScenarioFlags prev_scen;
  std::uint64_t prev_seed = 1;
  std::string prev_out;
  preview->add_option("--seed", prev_seed, "Seed");
  preview->add_option("--out", prev_out, "Output directory")->required();
  prev_scen.add(preview);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) {
      RunConfig cfg;
      try {
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (seed) cfg.run.seed = *seed;
        if (iterations) cfg.run.iterations = *iterations;
        if (stage2_robots) cfg.curriculum.stage2.robots = *stage2_robots;
        for (const auto& o : overrides) apply_override(cfg, o);
        if (!out_dir.empty()) cfg.run.out = out_dir;
        cfg.validate();
      } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
      }
      std::optional<fs::path> resume_path;
      if (!resume.empty()) resume_path = resume;
      const auto res = run_training(cfg, cfg.run.out, resume_path, quiet ? nullptr : &std::cout);
      std::cout << "trained " << res.iterations << " iterations into " << cfg.run.out;
      if (res.last_eval) std::cout << "; last eval success " << res.last_eval->success_rate;
      std::cout << '\n';
      return kOk;
    }

    if (*eval) {
      std::unique_ptr<EvalPolicy> policy;
      if (policy_kind == "baseline-straight") {
        policy = std::make_unique<GoStraightPolicy>();
      } else {
        if (checkpoint.empty()) {
          std::cerr << "error: --checkpoint is required for --policy checkpoint\n";
          return kUsage;
        }
        try {
          policy = NetworkPolicy::from_checkpoint(checkpoint, !sample);
        } catch (const CheckpointError& e) {
          std::cerr << "error: " << e.what() << '\n';
          return kFailure;
        }
      }
      std::vector<FamilyParams> families;
      if (suite) {
        families = generalization_families();
      } else {
        if (!known_family(eval_scen.family)) return unknown_family(eval_scen.family);
        families.push_back(eval_scen.params());
      }
      if (!eval_out.empty()) fs::create_directories(eval_out);
      std::ofstream report;
      if (!eval_out.empty()) report.open(fs::path(eval_out) / "report.jsonl");
      for (std::size_t f = 0; f < families.size(); ++f) {
        EvalOptions opt;
        opt.trials = trials;
        opt.seed = eval_seed;
        opt.time_limit = time_limit;
        if (!eval_out.empty()) {
          const std::string tag = families.size() > 1 ? "_" + families[f].family : "";
          opt.raw_out = fs::path(eval_out) / ("trials" + tag + ".jsonl");
          opt.replay_out = fs::path(eval_out) / ("replay" + tag + ".jsonl");
        }
        const MetricsRecord m = evaluate(*policy, families[f], opt);
        std::cout << format_report(m) << '\n';
        if (report.is_open()) report << to_json(m).dump() << '\n';
      }
      return kOk;
    }

    if (*replay) {
      ReplayLog log;
      try {
        log = parse_replay(replay_in);
      } catch (const ReplayError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
      }
      fs::create_directories(replay_out);
      write_text(fs::path(replay_out) / "trajectories.svg", render_svg(log));
      const std::string table = format_summary(log);
      write_text(fs::path(replay_out) / "summary.txt", table);
      std::cout << table;
      return kOk;
    }

    if (*grad) {
      const GradcheckReport rep = run_gradcheck(gopt);
      for (const auto& b : rep.blocks) {
        std::printf("%-6s %-13s max_rel_error=%.3e checked=%d kinks_skipped=%d\n",
                    b.network.c_str(), b.block.c_str(), b.max_rel_error, b.checked,
                    b.kinks_skipped);
      }
      std::printf("gradcheck %s (tolerance %.0e)\n", rep.passed ? "PASS" : "FAIL",
                  gopt.tolerance);
      return rep.passed ? kOk : kFailure;
    }

    if (*preview) {
      if (!known_family(prev_scen.family)) return unknown_family(prev_scen.family);
      std::mt19937_64 rng(prev_seed);
      const ScenarioSpec spec = generate(prev_scen.params(), rng);
      fs::create_directories(prev_out);
      // A one-frame replay reuses the trajectory renderer.
      const fs::path log_path = fs::path(prev_out) / "scenario.jsonl";
      {
        std::ofstream out(log_path);
        ReplayWriter w(out);
        w.header(spec, make_world(spec));
      }
      const ReplayLog log = parse_replay(log_path);
      write_text(fs::path(prev_out) / "scenario.svg", render_svg(log));
      std::cout << spec.name << ": " << spec.robots.size() << " robots, "
                << spec.obstacles.segments.size() << " segments, "
                << spec.obstacles.discs.size() << " discs; clear="
                << (initial_state_is_clear(spec) ? "yes" : "no") << '\n';
      return kOk;
    }
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
