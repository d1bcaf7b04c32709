#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rlihf/env.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/metrics.hpp"
#include "rlihf/replay_buffer.hpp"
#include "rlihf/sac.hpp"

namespace rlihf {

/// Independent random streams of one training run.
struct StreamSeeds {
  std::uint64_t init = 0;     // network initialization
  std::uint64_t env = 0;      // episode reset seeds
  std::uint64_t policy = 0;   // exploration and reparameterization noise
  std::uint64_t buffer = 0;   // minibatch sampling
  std::uint64_t decoder = 0;  // simulated observer
  std::uint64_t eval = 0;     // evaluation scenes

  /// Everything except the decoder depends on (master_seed, seed) only so
  /// that sparse and shaped runs of one seed are paired.
  static StreamSeeds derive(std::uint64_t master_seed, std::uint64_t run_seed, std::uint64_t decoder_salt);
};

struct TrainingOptions {
  long total_timesteps = 200000;
  double alpha = 0.0;
  double progress_tolerance = kDefaultProgressTolerance;
  long eval_interval = 5000;
  int eval_episodes = 10;
};

struct CurveRow {
  long step = 0;
  double eval_return_mean = 0.0;
  double train_return = 0.0;
};

/// Single-run training loop: act, step, judge, decode, shape, push, update.
class Trainer {
 public:
  /// `feedback` may be null: feedback channel disabled (sparse reward only).
  Trainer(SceneSpec scene, SacConfig sac, TrainingOptions options, std::unique_ptr<FeedbackChannel> feedback,
          StreamSeeds seeds);

  /// One environment interaction plus any gradient updates due.
  ShapedReward train_step();

  /// Deterministic-policy episodes without feedback on the fixed eval scenes.
  std::vector<EpisodeRecord> evaluate();

  using EpisodeSink = std::function<void(const EpisodeRecord&)>;
  /// Runs to total_timesteps, evaluating at step 0 and every eval_interval.
  void run(const EpisodeSink& on_episode = {});

  long global_step() const { return global_step_; }
  const SacAgent& agent() const { return agent_; }
  SacAgent& agent() { return agent_; }
  const Environment& env() const { return env_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<CurveRow>& curve() const { return curve_; }
  const std::vector<EvalLog>& eval_logs() const { return eval_logs_; }
  const std::vector<EpisodeRecord>& eval_episodes() const { return eval_episodes_; }
  /// Training episodes completed so far (only kept when `keep` was set).
  const std::vector<EpisodeRecord>& train_episodes() const { return train_episodes_; }
  void keep_train_episodes(bool keep) { keep_train_episodes_ = keep; }
  /// Transitions pushed so far (only kept when recording was enabled).
  const std::vector<Transition>& recorded_transitions() const { return transitions_; }
  void record_transitions(bool on) { record_transitions_ = on; }
  std::uint64_t gradient_updates() const { return agent_.state().update_count; }

 private:
  void begin_episode();
  void finish_episode(const EpisodeSink& sink);
  void checkpoint_eval();

  Environment env_;
  SacAgent agent_;
  TrainingOptions options_;
  std::unique_ptr<FeedbackChannel> feedback_;
  ReplayBuffer buffer_;
  Rng env_rng_;
  Rng policy_rng_;
  Rng buffer_rng_;
  std::uint64_t eval_seed_;

  WorldState state_;
  Eigen::VectorXd observation_;
  double distance_ = 0.0;
  EpisodeRecord episode_;
  long episode_count_ = 0;
  long global_step_ = 0;
  double last_train_return_ = 0.0;
  std::vector<double> window_returns_;

  std::vector<CurveRow> curve_;
  std::vector<EvalLog> eval_logs_;
  std::vector<EpisodeRecord> eval_episodes_;
  std::vector<EpisodeRecord> train_episodes_;
  bool keep_train_episodes_ = false;
  std::vector<Transition> transitions_;
  bool record_transitions_ = false;
  EpisodeSink sink_;
};

}  // namespace rlihf
