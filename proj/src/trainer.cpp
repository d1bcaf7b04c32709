#include "rlihf/trainer.hpp"

#include <numeric>

#include "rlihf/errors.hpp"

namespace rlihf {

StreamSeeds StreamSeeds::derive(std::uint64_t master_seed, std::uint64_t run_seed, std::uint64_t decoder_salt) {
  const std::uint64_t base = derive_seed(master_seed, run_seed);
  StreamSeeds s;
  s.init = derive_seed(base, "init");
  s.env = derive_seed(base, "env");
  s.policy = derive_seed(base, "policy");
  s.buffer = derive_seed(base, "buffer");
  s.eval = derive_seed(base, "eval");
  s.decoder = derive_seed(derive_seed(base, "decoder"), decoder_salt);
  return s;
}

Trainer::Trainer(SceneSpec scene, SacConfig sac, TrainingOptions options, std::unique_ptr<FeedbackChannel> feedback,
                 StreamSeeds seeds)
    : env_(std::move(scene)),
      agent_(env_.observation_dim(), env_.action_dim(), sac, seeds.init),
      options_(options),
      feedback_(std::move(feedback)),
      buffer_(sac.buffer_capacity, env_.observation_dim(), env_.action_dim()),
      env_rng_(seeds.env),
      policy_rng_(seeds.policy),
      buffer_rng_(seeds.buffer),
      eval_seed_(seeds.eval) {
  if (options_.total_timesteps < 1) throw ConfigError("total_timesteps: must be positive");
  if (!(options_.alpha >= 0.0)) throw ConfigError("alpha: must be >= 0");
  if (options_.eval_interval < 1) throw ConfigError("eval.interval: must be positive");
  if (options_.eval_episodes < 1) throw ConfigError("eval.episodes: must be positive");
  begin_episode();
}

void Trainer::begin_episode() {
  state_ = env_.reset(env_rng_());
  observation_ = env_.observe(state_);
  distance_ = env_.distance_to_subgoal(state_);
  episode_ = EpisodeRecord{};
  episode_.kind = "train";
  episode_.episode_index = episode_count_;
  episode_.global_step_at_start = global_step_;
  episode_.end_effector_path.push_back(env_.end_effector(state_));
}

void Trainer::finish_episode(const EpisodeSink& sink) {
  last_train_return_ = episode_.total_return();
  window_returns_.push_back(last_train_return_);
  if (sink) sink(episode_);
  if (keep_train_episodes_) train_episodes_.push_back(episode_);
  ++episode_count_;
  begin_episode();
}

ShapedReward Trainer::train_step() {
  const SacConfig& cfg = agent_.config();
  Eigen::VectorXd action;
  if (global_step_ < cfg.warmup_steps) {
    action.resize(env_.action_dim());
    for (int i = 0; i < action.size(); ++i) action[i] = 2.0 * uniform01(policy_rng_) - 1.0;
  } else {
    action = agent_.act(observation_, true, policy_rng_);
  }

  auto [next, outcome] = env_.step(state_, Action{action});
  const ErrorJudgment judgment = judge_transition(distance_, outcome, options_.progress_tolerance);

  ShapedReward shaped;
  if (feedback_) {
    // drawn even at alpha = 0 to keep the decoder stream aligned
    const double p = feedback_->next(judgment, static_cast<std::size_t>(global_step_));
    shaped = shape_reward(outcome.r_env, p, options_.alpha);
  } else {
    shaped.r_env = outcome.r_env;
    shaped.r_total = outcome.r_env;
  }

  Transition t{observation_, action, shaped.r_total, outcome.observation, outcome.success};
  buffer_.push(t);
  if (record_transitions_) transitions_.push_back(std::move(t));

  episode_.end_effector_path.push_back(outcome.end_effector);
  episode_.per_step_r_env.push_back(outcome.r_env);
  episode_.per_step_r_total.push_back(shaped.r_total);
  if (outcome.collided) ++episode_.collision_steps;
  episode_.success = outcome.success;

  state_ = std::move(next);
  observation_ = outcome.observation;
  distance_ = outcome.distance_to_subgoal;
  ++global_step_;
  agent_.state().env_steps = static_cast<std::uint64_t>(global_step_);

  if (global_step_ > cfg.warmup_steps) {
    for (int u = 0; u < cfg.update_to_data_ratio; ++u) {
      const Batch batch = buffer_.sample(cfg.batch_size, buffer_rng_);
      agent_.gradient_step(batch, policy_rng_);
    }
  }

  if (outcome.terminated) finish_episode(sink_);
  return shaped;
}

std::vector<EpisodeRecord> Trainer::evaluate() {
  Rng scenes(eval_seed_);
  Rng unused(0);
  std::vector<EpisodeRecord> out;
  for (int e = 0; e < options_.eval_episodes; ++e) {
    WorldState s = env_.reset(scenes());
    EpisodeRecord rec;
    rec.kind = "eval";
    rec.episode_index = e;
    rec.global_step_at_start = global_step_;
    rec.end_effector_path.push_back(env_.end_effector(s));
    Eigen::VectorXd obs = env_.observe(s);
    while (!s.terminated) {
      const Eigen::VectorXd a = agent_.act(obs, false, unused);
      auto [next, outcome] = env_.step(s, Action{a});
      rec.end_effector_path.push_back(outcome.end_effector);
      rec.per_step_r_env.push_back(outcome.r_env);
      rec.per_step_r_total.push_back(outcome.r_env);
      if (outcome.collided) ++rec.collision_steps;
      rec.success = outcome.success;
      obs = outcome.observation;
      s = std::move(next);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void Trainer::checkpoint_eval() {
  auto episodes = evaluate();
  EvalLog log{global_step_, {}};
  for (const auto& e : episodes) log.returns.push_back(e.env_return());
  double train_return = last_train_return_;
  if (!window_returns_.empty()) {
    train_return = std::accumulate(window_returns_.begin(), window_returns_.end(), 0.0) /
                   static_cast<double>(window_returns_.size());
  }
  window_returns_.clear();
  curve_.push_back({global_step_, mean_std(log.returns).mean, train_return});
  eval_logs_.push_back(std::move(log));
  for (auto& e : episodes) {
    if (sink_) sink_(e);
    eval_episodes_.push_back(std::move(e));
  }
}

void Trainer::run(const EpisodeSink& on_episode) {
  sink_ = on_episode;
  if (global_step_ == 0) checkpoint_eval();
  while (global_step_ < options_.total_timesteps) {
    train_step();
    if (global_step_ % options_.eval_interval == 0 || global_step_ == options_.total_timesteps) checkpoint_eval();
  }
  sink_ = {};
}

}  // namespace rlihf
