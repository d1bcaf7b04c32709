#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rlihf/mlp.hpp"
#include "rlihf/replay_buffer.hpp"
#include "rlihf/rng.hpp"

namespace rlihf {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double temperature_lr = 3e-4;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double initial_temperature = 1.0;
  std::optional<double> target_entropy;  // defaults to -action_dim
  int update_to_data_ratio = 1;
  long warmup_steps = 1000;
  std::vector<int> hidden_sizes{64, 64};
  /// Value of the absorbing state entered by a terminal transition.
  double terminal_value = 0.0;

  void validate() const;
};

/// Tanh-squashed diagonal Gaussian evaluated at fixed standard-normal noise.
struct SquashedSample {
  Eigen::MatrixXd mean;       // K x B
  Eigen::MatrixXd raw_log_std;  // K x B, network output before clamping
  Eigen::MatrixXd log_std;    // K x B, clamped
  Eigen::MatrixXd pre_tanh;   // u = mean + exp(log_std) * noise
  Eigen::MatrixXd action;     // tanh(u)
  Eigen::VectorXd log_prob;   // B
};

/// log N(u; mean, std) summed over dimensions minus sum log(1 - tanh(u)^2).
Eigen::VectorXd squashed_log_prob(const Eigen::MatrixXd& noise, const Eigen::MatrixXd& log_std,
                                  const Eigen::MatrixXd& pre_tanh);

struct SacState {
  MlpNetwork actor;  // obs -> [mean; log_std]
  MlpNetwork critic1;
  MlpNetwork critic2;
  MlpNetwork target1;
  MlpNetwork target2;
  double log_temperature = 0.0;
  AdamOptimizer actor_opt;
  AdamOptimizer critic1_opt;
  AdamOptimizer critic2_opt;
  ScalarAdam temperature_opt;
  std::uint64_t update_count = 0;  // gradient steps taken
  std::uint64_t env_steps = 0;     // interactions, maintained by the trainer

  double temperature() const;
  bool operator==(const SacState& other) const;
};

struct CriticLoss {
  double loss = 0.0;
  Eigen::VectorXd td_target;
  std::vector<DenseLayer> grad1;
  std::vector<DenseLayer> grad2;
};

struct ActorLoss {
  double loss = 0.0;
  Eigen::VectorXd log_prob;
  std::vector<DenseLayer> grad;
};

struct TemperatureLoss {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d log_temperature
};

class SacAgent {
 public:
  SacAgent(int observation_dim, int action_dim, SacConfig cfg, std::uint64_t init_seed);

  const SacConfig& config() const { return cfg_; }
  SacState& state() { return state_; }
  const SacState& state() const { return state_; }
  int observation_dim() const { return observation_dim_; }
  int action_dim() const { return action_dim_; }
  double target_entropy() const;

  /// Squashed sample (stochastic) or squashed mean; components in (-1, 1).
  Eigen::VectorXd act(const Eigen::VectorXd& observation, bool stochastic, Rng& rng) const;

  SquashedSample policy(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& noise,
                        MlpNetwork::Tape* tape = nullptr) const;

  // Losses at explicit noise; pure functions of the current state.
  CriticLoss critic_loss(const Batch& batch, const Eigen::MatrixXd& next_noise, bool want_grad) const;
  ActorLoss actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, bool want_grad) const;
  TemperatureLoss temperature_loss(double mean_log_prob) const;

  // One optimizer step each; noise drawn from `rng`.
  double update_critics(const Batch& batch, Rng& rng);
  /// Returns the loss; `mean_log_prob` receives the detached batch mean.
  double update_actor(const Batch& batch, Rng& rng, double* mean_log_prob = nullptr);
  double update_temperature(const Batch& batch, Rng& rng);
  double apply_temperature_step(double mean_log_prob);
  void soft_update_targets(double tau);

  /// Critic, actor and temperature steps followed by a target update.
  void gradient_step(const Batch& batch, Rng& rng);

  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions) const;
  Eigen::MatrixXd standard_normal(int rows, int cols, Rng& rng) const;

  int observation_dim_;
  int action_dim_;
  SacConfig cfg_;
  SacState state_;
};

/// Standard normal via Box-Muller on uniform01, specified bit-for-bit.
double standard_normal(Rng& rng);

}  // namespace rlihf
