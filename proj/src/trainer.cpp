#include "mrca/trainer.hpp"

#include "mrca/gaussian.hpp"
#include "mrca/parallel.hpp"
#include "mrca/reward.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mrca {

using ojson = nlohmann::ordered_json;

struct Trainer::Env {
  int index = 0;
  int robots = 1;
  std::mt19937_64 rng;
  ScenarioSpec spec;
  WorldState world;
  std::vector<ScanHistory> hist;
  std::vector<int> open;  // open trajectory id per robot, -1 if none
  std::int64_t episode_step = 0;
  RunningNormalizer delta;
  bool done = false;
};

namespace {

struct TrajectoryBuffer {
  std::vector<VectorX<TrainScalar>> obs;
  std::vector<Eigen::Vector2d> actions;
  std::vector<Eigen::Vector2d> means;
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<double> values;
  bool terminal = false;
  double bootstrap = 0.0;
  RobotStatus outcome = RobotStatus::kActive;
  double episode_return = 0.0;
};

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream ss(state);
  ss >> rng;
  if (!ss) throw CheckpointError("checkpoint: malformed rng state");
}

std::string directive_name(StageDirective d) {
  switch (d) {
    case StageDirective::kEnterStage2: return "enter_stage2";
    case StageDirective::kForceStage2: return "force_stage2";
    case StageDirective::kStay: break;
  }
  return "stay";
}

}  // namespace

ojson to_json(const IterationMetrics& m) {
  ojson j;
  j["iteration"] = m.iteration;
  j["stage"] = m.stage;
  j["lr_theta"] = m.lr_theta;
  j["steps"] = m.collect.steps;
  j["episodes"] = m.collect.episodes;
  j["arrivals"] = m.collect.arrivals;
  j["collisions"] = m.collect.collisions;
  j["timeouts"] = m.collect.timeouts;
  j["success_rate"] = m.collect.episodes
                          ? static_cast<double>(m.collect.arrivals) / m.collect.episodes
                          : 0.0;
  j["mean_episode_reward"] = m.collect.mean_episode_reward;
  j["rolling_success"] = m.rolling_success ? ojson(*m.rolling_success) : ojson(nullptr);
  j["beta"] = m.beta_used;
  j["beta_next"] = m.beta_next;
  j["mean_kl"] = m.policy.final_kl;
  j["kl_before_epoch"] = m.policy.kl_before_epoch;
  j["policy_epochs"] = m.policy.epochs;
  j["early_stopped"] = m.policy.early_stopped;
  j["policy_loss"] = -m.policy.objective;
  j["clipped_steps"] = m.policy.clipped_steps;
  j["value_loss"] = m.value.initial_loss;
  j["value_loss_last"] = m.value.final_loss;
  j["curriculum"] = directive_name(m.directive);
  if (m.eval) j["eval"] = to_json(*m.eval);
  return j;
}

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  rng_.seed(derive_seed(cfg_.run.seed, 0));
  initialize(policy_, rng_, cfg_.init);
  initialize(value_, rng_, cfg_.init);
  beta_ = cfg_.train.beta_init;
  build_envs(nullptr);
}

Trainer::Trainer(RunConfig cfg, const Checkpoint& c) : cfg_(std::move(cfg)) {
  cfg_.validate();
  policy_ = c.policy;
  value_ = c.value;
  policy_adam_ = c.policy_adam;
  value_adam_ = c.value_adam;
  normalizer_ = c.normalizer;
  restore_rng(rng_, c.trainer_rng);
  iteration_ = c.iteration;
  stage_ = c.stage;
  beta_ = c.beta;
  recent_.assign(c.recent_outcomes.begin(), c.recent_outcomes.end());
  build_envs(&c.env_rngs);
}

const CurriculumStage& Trainer::current_stage() const {
  return stage_ >= 2 && cfg_.curriculum.has_stage2() ? cfg_.curriculum.stage2
                                                     : cfg_.curriculum.stage1;
}

void Trainer::build_envs(const std::vector<std::string>* rng_states) {
  const auto& st = current_stage();
  envs_.clear();
  if (rng_states && static_cast<int>(rng_states->size()) != st.instances)
    throw CheckpointError("checkpoint: environment count does not match the stage");
  for (int k = 0; k < st.instances; ++k) {
    auto env = std::make_shared<Env>();
    env->index = k;
    env->robots = st.robots / st.instances + (k < st.robots % st.instances ? 1 : 0);
    env->rng.seed(derive_seed(cfg_.run.seed, static_cast<std::uint64_t>(stage_) * 1000 + k + 1));
    if (rng_states) restore_rng(env->rng, (*rng_states)[k]);
    envs_.push_back(std::move(env));
  }
}

void Trainer::reset_env(Env& env) const {
  const auto& st = current_stage();
  std::uniform_int_distribution<std::size_t> pick(0, st.scenarios.size() - 1);
  FamilyParams fp = st.scenarios[pick(env.rng)];
  fp.n = env.robots;
  if (fp.family == "swap" || fp.family == "crossing" || fp.family == "corridor")
    fp.n = std::max(1, env.robots / 2);
  fp.robot_radius = cfg_.world.robot_radius;
  fp.v_max = cfg_.world.v_max;
  env.spec = generate(fp, env.rng);
  env.world = make_world(env.spec, cfg_.world);
  env.hist.assign(env.world.robots.size(), ScanHistory{});
  env.open.assign(env.world.robots.size(), -1);
  env.episode_step = 0;
}

std::optional<double> Trainer::rolling_success() const {
  if (static_cast<int>(recent_.size()) < cfg_.curriculum.success_window) return std::nullopt;
  double s = 0.0;
  for (int o : recent_) s += o;
  return s / static_cast<double>(recent_.size());
}

RolloutBatch<TrainScalar> Trainer::collect(CollectStats* stats_out) {
  const RunningNormalizer snapshot = normalizer_;
  const TrainConfig& tc = cfg_.train;
  const double w_max = cfg_.world.w_max;
  std::vector<TrajectoryBuffer> bufs;
  std::vector<int> closed;
  std::int64_t total = 0;

  for (auto& e : envs_) {
    e->delta = RunningNormalizer{};
    e->done = false;
    reset_env(*e);
  }

  struct Task {
    Env* env;
    std::size_t robot;
  };
  std::vector<Task> tasks;
  std::vector<ObsVector> raws;

  auto observe = [&](const std::vector<Task>& ts, MatrixX<TrainScalar>& obs) {
    raws.resize(ts.size());
    obs.resize(kObsDim, static_cast<Eigen::Index>(ts.size()));
    parallel_for(ts.size(), [&](std::size_t t) {
      const auto stack = assemble_observation(ts[t].env->world, ts[t].robot,
                                              ts[t].env->hist[ts[t].robot]);
      raws[t] = stack.flatten();
      obs.col(static_cast<Eigen::Index>(t)) = snapshot.normalize(raws[t]).cast<TrainScalar>();
    });
  };

  auto close = [&](int id, bool terminal, double bootstrap, RobotStatus outcome) {
    auto& b = bufs[static_cast<std::size_t>(id)];
    b.terminal = terminal;
    b.bootstrap = bootstrap;
    b.outcome = outcome;
    closed.push_back(id);
  };

  MatrixX<TrainScalar> obs;
  while (true) {
    tasks.clear();
    for (auto& e : envs_) {
      if (e->done) continue;
      for (std::size_t i = 0; i < e->world.robots.size(); ++i)
        if (e->world.robots[i].active() && !e->spec.robots[i].scripted)
          tasks.push_back({e.get(), i});
    }
    if (tasks.empty()) break;

    observe(tasks, obs);
    for (std::size_t t = 0; t < tasks.size(); ++t) tasks[t].env->delta.update(raws[t]);
    const auto pol = policy_forward(policy_, obs);
    const auto val = value_forward(value_, obs);
    const Eigen::Vector2d logstd = pol.logstd.template cast<double>();

    std::vector<std::vector<Action>> actions(envs_.size());
    for (auto& e : envs_) {
      if (e->done) continue;
      auto& acts = actions[static_cast<std::size_t>(e->index)];
      acts.assign(e->world.robots.size(), Action{});
      for (std::size_t i = 0; i < acts.size(); ++i)
        if (e->spec.robots[i].scripted) acts[i] = e->spec.robots[i].scripted_action;
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      Env& e = *tasks[t].env;
      const std::size_t i = tasks[t].robot;
      const auto col = static_cast<Eigen::Index>(t);
      const Eigen::Vector2d mean = pol.mean.col(col).template cast<double>();
      const SampledAction sa =
          sample_action(mean, logstd, e.rng, e.world.robots[i].v_max, w_max);
      actions[static_cast<std::size_t>(e.index)][i] = sa.action;
      if (e.open[i] < 0) {
        e.open[i] = static_cast<int>(bufs.size());
        bufs.emplace_back();
      }
      auto& b = bufs[static_cast<std::size_t>(e.open[i])];
      b.obs.push_back(obs.col(col));
      b.actions.push_back(sa.raw);
      b.means.push_back(mean);
      b.logp.push_back(log_prob(mean, logstd, sa.raw));
      b.values.push_back(static_cast<double>(val[col]));
    }

    std::vector<WorldState> next(envs_.size());
    parallel_for(envs_.size(), [&](std::size_t k) {
      if (!envs_[k]->done) next[k] = advance_world(envs_[k]->world, actions[k]);
    });

    std::vector<Task> truncated;
    std::vector<Env*> finished;
    std::size_t t = 0;
    for (auto& e : envs_) {
      if (e->done) continue;
      const std::size_t k = static_cast<std::size_t>(e->index);
      bool any_active = false;
      for (; t < tasks.size() && tasks[t].env == e.get(); ++t) {
        const std::size_t i = tasks[t].robot;
        const RobotState& before = e->world.robots[i];
        const RobotState& after = next[k].robots[i];
        const double r = step_reward(before, after, cfg_.reward).total;
        auto& b = bufs[static_cast<std::size_t>(e->open[i])];
        b.rewards.push_back(r);
        b.episode_return += r;
        ++total;
        if (!after.active()) {
          close(e->open[i], true, 0.0, after.status);
          e->open[i] = -1;
        } else {
          any_active = true;
        }
      }
      e->world = std::move(next[k]);
      ++e->episode_step;
      if (any_active && e->episode_step >= tc.episode_steps) {
        for (std::size_t i = 0; i < e->open.size(); ++i)
          if (e->open[i] >= 0) truncated.push_back({e.get(), i});
        finished.push_back(e.get());
      } else if (!any_active) {
        finished.push_back(e.get());
      }
    }

    if (!truncated.empty()) {
      observe(truncated, obs);
      const auto boot = value_forward(value_, obs);
      for (std::size_t q = 0; q < truncated.size(); ++q) {
        Env& e = *truncated[q].env;
        const std::size_t i = truncated[q].robot;
        close(e.open[i], false, static_cast<double>(boot[static_cast<Eigen::Index>(q)]),
              RobotStatus::kActive);
        e.open[i] = -1;
      }
    }
    // Episode boundaries are the only points where collection may stop.
    for (Env* e : finished) {
      if (total >= tc.T_max)
        e->done = true;
      else
        reset_env(*e);
    }
  }

  for (const auto& e : envs_) normalizer_.merge(e->delta);

  RolloutBatch<TrainScalar> batch;
  batch.resize(total);
  batch.logstd_old = policy_.logstd().template cast<double>();
  CollectStats stats;
  stats.steps = total;
  Eigen::Index pos = 0;
  double return_sum = 0.0;
  for (int id : closed) {
    const auto& b = bufs[static_cast<std::size_t>(id)];
    const auto len = static_cast<Eigen::Index>(b.rewards.size());
    for (Eigen::Index s = 0; s < len; ++s) {
      const auto u = static_cast<std::size_t>(s);
      batch.obs.col(pos + s) = b.obs[u];
      batch.actions.col(pos + s) = b.actions[u];
      batch.mean_old.col(pos + s) = b.means[u];
      batch.logp_old[pos + s] = b.logp[u];
      batch.rewards[pos + s] = b.rewards[u];
      batch.values[pos + s] = b.values[u];
    }
    TrajectorySlice slice;
    slice.begin = pos;
    slice.length = len;
    slice.terminal = b.terminal;
    slice.bootstrap = b.bootstrap;
    slice.outcome = b.outcome;
    slice.episode_return = b.episode_return;
    batch.trajectories.push_back(slice);
    pos += len;

    ++stats.episodes;
    return_sum += b.episode_return;
    stats.outcomes.push_back(b.outcome == RobotStatus::kArrived ? 1 : 0);
    switch (b.outcome) {
      case RobotStatus::kArrived: ++stats.arrivals; break;
      case RobotStatus::kCollided: ++stats.collisions; break;
      case RobotStatus::kActive: ++stats.timeouts; break;
    }
  }
  if (stats.episodes) stats.mean_episode_reward = return_sum / stats.episodes;
  if (stats_out) *stats_out = std::move(stats);
  return batch;
}

IterationMetrics Trainer::iterate() {
  IterationMetrics m;
  m.stage = stage_;
  m.lr_theta = current_stage().lr_theta;
  RolloutBatch<TrainScalar> batch = collect(&m.collect);
  finalize_batch(batch, cfg_.train);
  m.policy = update_policy(batch, policy_, policy_adam_, beta_, m.lr_theta, cfg_.train);
  m.value = update_value(batch, value_, value_adam_, cfg_.train);
  m.beta_used = beta_;
  beta_ = adapt_beta(beta_, m.policy.final_kl, cfg_.train);
  m.beta_next = beta_;

  for (int o : m.collect.outcomes) recent_.push_back(o);
  while (static_cast<int>(recent_.size()) > cfg_.curriculum.success_window) recent_.pop_front();
  ++iteration_;
  m.iteration = iteration_;
  m.rolling_success = rolling_success();

  TrainingStats ts{stage_, iteration_, m.rolling_success};
  m.directive = curriculum_next(cfg_.curriculum, ts);
  if (m.directive != StageDirective::kStay) {
    stage_ = 2;
    recent_.clear();
    build_envs(nullptr);
  }

  const auto& run = cfg_.run;
  if (run.eval_every > 0 && iteration_ % run.eval_every == 0) {
    NetworkPolicy pol(policy_, normalizer_, true, cfg_.world.w_max);
    EvalOptions opt;
    opt.trials = run.eval_trials;
    opt.seed = derive_seed(run.seed, 0xe7a1ULL);
    m.eval = evaluate(pol, run.eval_scenario, opt);
  }
  return m;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.iteration = iteration_;
  c.stage = stage_;
  c.beta = beta_;
  c.policy = policy_;
  c.value = value_;
  c.policy_adam = policy_adam_;
  c.value_adam = value_adam_;
  c.normalizer = normalizer_;
  c.trainer_rng = rng_state(rng_);
  for (const auto& e : envs_) c.env_rngs.push_back(rng_state(e->rng));
  c.recent_outcomes.assign(recent_.begin(), recent_.end());
  c.config = to_json(cfg_);
  return c;
}

TrainRunResult run_training(const RunConfig& cfg, const std::filesystem::path& out,
                            const std::optional<std::filesystem::path>& resume,
                            std::ostream* progress) {
  namespace fs = std::filesystem;
  fs::create_directories(out / "checkpoints");
  save_run_config(cfg, out / "config.json");

  std::unique_ptr<Trainer> trainer;
  if (resume) {
    trainer = std::make_unique<Trainer>(cfg, load_checkpoint(*resume));
  } else {
    trainer = std::make_unique<Trainer>(cfg);
  }
  const auto mode = resume ? std::ios::app : std::ios::trunc;
  std::ofstream metrics(out / "metrics.log", mode);
  std::ofstream timing(out / "timing.log", mode);
  if (!metrics || !timing) throw std::runtime_error("cannot write logs in '" + out.string() + "'");

  TrainRunResult result;
  while (trainer->iteration() < cfg.run.iterations) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationMetrics m = trainer->iterate();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    metrics << to_json(m).dump() << '\n';
    metrics.flush();
    timing << ojson{{"iteration", m.iteration}, {"wall_seconds", secs}}.dump() << '\n';
    timing.flush();

    const Checkpoint c = trainer->checkpoint();
    save_checkpoint(c, out / "checkpoints" / "latest.ckpt");
    if (m.iteration % cfg.run.checkpoint_every == 0) {
      std::ostringstream name;
      name << "iter_" << std::setw(6) << std::setfill('0') << m.iteration << ".ckpt";
      save_checkpoint(c, out / "checkpoints" / name.str());
    }
    ++result.iterations;
    if (progress) {
      *progress << "iter " << m.iteration << " stage " << m.stage << " steps "
                << m.collect.steps << " success "
                << (m.collect.episodes ? double(m.collect.arrivals) / m.collect.episodes : 0.0)
                << " reward " << m.collect.mean_episode_reward << " kl " << m.policy.final_kl
                << " beta " << m.beta_next << " epochs " << m.policy.epochs << " ("
                << secs << " s)";
      if (m.eval) *progress << " eval_success " << m.eval->success_rate;
      *progress << '\n' << std::flush;
    }
    if (m.eval) {
      result.last_eval = m.eval;
      result.best_eval_success = std::max(result.best_eval_success, m.eval->success_rate);
      if (cfg.run.stop_success > 0.0 && m.eval->success_rate >= cfg.run.stop_success) {
        result.stopped_on_success = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace mrca
