#include "rlihf/sac.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "rlihf/errors.hpp"

namespace rlihf {

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'L', 'I', 'H', 'F', 'S', 'A', 'C'};
constexpr std::uint64_t kCheckpointVersion = 1;

// log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), stable for large |u|.
double log_one_minus_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

}  // namespace

void SacConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma: must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau: must lie in (0, 1]");
  if (!(actor_lr > 0.0)) throw ConfigError("sac.actor_lr: must be positive");
  if (!(critic_lr > 0.0)) throw ConfigError("sac.critic_lr: must be positive");
  if (!(temperature_lr > 0.0)) throw ConfigError("sac.temperature_lr: must be positive");
  if (batch_size < 1) throw ConfigError("sac.batch_size: must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("sac.buffer_capacity: must be >= 1");
  if (static_cast<std::size_t>(batch_size) > buffer_capacity) {
    throw ConfigError("sac.batch_size: must not exceed sac.buffer_capacity");
  }
  if (!(initial_temperature > 0.0)) throw ConfigError("sac.initial_temperature: must be positive");
  if (target_entropy && !std::isfinite(*target_entropy)) throw ConfigError("sac.target_entropy: must be finite");
  if (update_to_data_ratio < 1) throw ConfigError("sac.update_to_data_ratio: must be >= 1");
  if (warmup_steps < 0) throw ConfigError("sac.warmup_steps: must be >= 0");
  if (!std::isfinite(terminal_value)) throw ConfigError("sac.terminal_value: must be finite");
  if (hidden_sizes.empty()) throw ConfigError("sac.hidden_sizes: need at least one hidden layer");
  for (int h : hidden_sizes) {
    if (h < 1) throw ConfigError("sac.hidden_sizes: sizes must be positive");
  }
}

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd squashed_log_prob(const Eigen::MatrixXd& noise, const Eigen::MatrixXd& log_std,
                                  const Eigen::MatrixXd& pre_tanh) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd out(noise.cols());
  for (Eigen::Index b = 0; b < noise.cols(); ++b) {
    double lp = 0.0;
    for (Eigen::Index k = 0; k < noise.rows(); ++k) {
      lp += -0.5 * noise(k, b) * noise(k, b) - log_std(k, b) - half_log_2pi;
      lp -= log_one_minus_tanh_sq(pre_tanh(k, b));
    }
    out[b] = lp;
  }
  return out;
}

double SacState::temperature() const { return std::exp(log_temperature); }

bool SacState::operator==(const SacState& o) const {
  return actor == o.actor && critic1 == o.critic1 && critic2 == o.critic2 && target1 == o.target1 &&
         target2 == o.target2 && log_temperature == o.log_temperature && actor_opt == o.actor_opt &&
         critic1_opt == o.critic1_opt && critic2_opt == o.critic2_opt && temperature_opt == o.temperature_opt &&
         update_count == o.update_count && env_steps == o.env_steps;
}

SacAgent::SacAgent(int observation_dim, int action_dim, SacConfig cfg, std::uint64_t init_seed)
    : observation_dim_(observation_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (observation_dim < 1 || action_dim < 1) throw ConfigError("agent dimensions must be positive");
  Rng rng(init_seed);
  std::vector<int> actor_sizes{observation_dim};
  std::vector<int> critic_sizes{observation_dim + action_dim};
  for (int h : cfg_.hidden_sizes) {
    actor_sizes.push_back(h);
    critic_sizes.push_back(h);
  }
  actor_sizes.push_back(2 * action_dim);
  critic_sizes.push_back(1);
  state_.actor = MlpNetwork(actor_sizes, rng);
  state_.critic1 = MlpNetwork(critic_sizes, rng);
  state_.critic2 = MlpNetwork(critic_sizes, rng);
  state_.target1 = state_.critic1;
  state_.target2 = state_.critic2;
  state_.log_temperature = std::log(cfg_.initial_temperature);
  state_.actor_opt = AdamOptimizer(state_.actor);
  state_.critic1_opt = AdamOptimizer(state_.critic1);
  state_.critic2_opt = AdamOptimizer(state_.critic2);
}

double SacAgent::target_entropy() const {
  return cfg_.target_entropy.value_or(-static_cast<double>(action_dim_));
}

Eigen::MatrixXd SacAgent::critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd x(obs.rows() + actions.rows(), obs.cols());
  x.topRows(obs.rows()) = obs;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

Eigen::MatrixXd SacAgent::standard_normal(int rows, int cols, Rng& rng) const {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rlihf::standard_normal(rng);
  return m;
}

SquashedSample SacAgent::policy(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& noise,
                                MlpNetwork::Tape* tape) const {
  const int k = action_dim_;
  const Eigen::MatrixXd out = state_.actor.forward(observations, tape);
  SquashedSample s;
  s.mean = out.topRows(k);
  s.raw_log_std = out.bottomRows(k);
  s.log_std = s.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.pre_tanh = s.mean.array() + s.log_std.array().exp() * noise.array();
  s.action = s.pre_tanh.array().tanh();
  s.log_prob = squashed_log_prob(noise, s.log_std, s.pre_tanh);
  return s;
}

Eigen::VectorXd SacAgent::act(const Eigen::VectorXd& observation, bool stochastic, Rng& rng) const {
  if (observation.size() != observation_dim_) throw InputError("act: observation has wrong dimension");
  if (!observation.allFinite()) throw InputError("act: observation is not finite");
  const Eigen::MatrixXd out = state_.actor.forward(observation);
  const int k = action_dim_;
  Eigen::VectorXd u = out.col(0).head(k);
  if (stochastic) {
    for (int i = 0; i < k; ++i) {
      const double log_std = std::clamp(out(k + i, 0), kLogStdMin, kLogStdMax);
      u[i] += std::exp(log_std) * rlihf::standard_normal(rng);
    }
  }
  Eigen::VectorXd a = u.array().tanh();
  // tanh saturates to +-1 in double for |u| > ~19; keep the open interval
  constexpr double edge = 1.0 - 1e-12;
  return a.cwiseMax(-edge).cwiseMin(edge);
}

CriticLoss SacAgent::critic_loss(const Batch& batch, const Eigen::MatrixXd& next_noise, bool want_grad) const {
  const int n = batch.size();
  if (n < 1) throw UsageError("critic update needs a non-empty batch");
  const double temp = state_.temperature();

  const SquashedSample next = policy(batch.next_observations, next_noise);
  const Eigen::MatrixXd next_in = critic_input(batch.next_observations, next.action);
  const Eigen::MatrixXd t1 = state_.target1.forward(next_in);
  const Eigen::MatrixXd t2 = state_.target2.forward(next_in);
  const Eigen::VectorXd soft_value = t1.row(0).cwiseMin(t2.row(0)).transpose() - temp * next.log_prob;

  CriticLoss out;
  out.td_target = batch.rewards.array() + cfg_.gamma * ((1.0 - batch.terminals.array()) * soft_value.array() +
                                                       batch.terminals.array() * cfg_.terminal_value);

  const Eigen::MatrixXd in = critic_input(batch.observations, batch.actions);
  MlpNetwork::Tape tape1, tape2;
  const Eigen::MatrixXd q1 = state_.critic1.forward(in, want_grad ? &tape1 : nullptr);
  const Eigen::MatrixXd q2 = state_.critic2.forward(in, want_grad ? &tape2 : nullptr);
  const Eigen::RowVectorXd e1 = q1.row(0) - out.td_target.transpose();
  const Eigen::RowVectorXd e2 = q2.row(0) - out.td_target.transpose();
  out.loss = (e1.squaredNorm() + e2.squaredNorm()) / n;
  if (want_grad) {
    out.grad1 = state_.critic1.zero_like();
    out.grad2 = state_.critic2.zero_like();
    state_.critic1.backward(tape1, (2.0 / n) * e1, &out.grad1, false);
    state_.critic2.backward(tape2, (2.0 / n) * e2, &out.grad2, false);
  }
  return out;
}

ActorLoss SacAgent::actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, bool want_grad) const {
  const int n = batch.size();
  if (n < 1) throw UsageError("actor update needs a non-empty batch");
  const int k = action_dim_;
  const double temp = state_.temperature();

  MlpNetwork::Tape actor_tape;
  const SquashedSample s = policy(batch.observations, noise, want_grad ? &actor_tape : nullptr);
  const Eigen::MatrixXd in = critic_input(batch.observations, s.action);
  MlpNetwork::Tape tape1, tape2;
  const Eigen::MatrixXd q1 = state_.critic1.forward(in, want_grad ? &tape1 : nullptr);
  const Eigen::MatrixXd q2 = state_.critic2.forward(in, want_grad ? &tape2 : nullptr);
  const Eigen::RowVectorXd qmin = q1.row(0).cwiseMin(q2.row(0));

  ActorLoss out;
  out.log_prob = s.log_prob;
  out.loss = (temp * s.log_prob.sum() - qmin.sum()) / n;
  if (!want_grad) return out;

  // d loss / d qmin = -1/n, routed to whichever critic attains the minimum
  Eigen::RowVectorXd g1 = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd g2 = Eigen::RowVectorXd::Zero(n);
  for (int b = 0; b < n; ++b) {
    if (q1(0, b) <= q2(0, b)) {
      g1[b] = -1.0 / n;
    } else {
      g2[b] = -1.0 / n;
    }
  }
  const Eigen::MatrixXd din1 = state_.critic1.backward(tape1, g1, nullptr, true);
  const Eigen::MatrixXd din2 = state_.critic2.backward(tape2, g2, nullptr, true);
  const Eigen::MatrixXd d_action = din1.bottomRows(k) + din2.bottomRows(k);

  // u = mean + exp(log_std) * noise, a = tanh(u)
  // d logp / d u = 2 tanh(u), d logp / d log_std (direct) = -1
  const Eigen::ArrayXXd a = s.action.array();
  const Eigen::ArrayXXd d_u = (temp / n) * 2.0 * a + d_action.array() * (1.0 - a.square());
  const Eigen::ArrayXXd std_dev = s.log_std.array().exp();
  Eigen::ArrayXXd d_log_std = d_u * std_dev * noise.array() - temp / n;

  // clamped log-std entries carry no gradient
  const Eigen::MatrixXd& raw = s.raw_log_std;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (raw.data()[i] < kLogStdMin || raw.data()[i] > kLogStdMax) d_log_std.data()[i] = 0.0;
  }

  Eigen::MatrixXd grad_out(2 * k, n);
  grad_out.topRows(k) = d_u.matrix();
  grad_out.bottomRows(k) = d_log_std.matrix();
  out.grad = state_.actor.zero_like();
  state_.actor.backward(actor_tape, grad_out, &out.grad, false);
  return out;
}

TemperatureLoss SacAgent::temperature_loss(double mean_log_prob) const {
  const double slack = mean_log_prob + target_entropy();
  return {-state_.log_temperature * slack, -slack};
}

double SacAgent::update_critics(const Batch& batch, Rng& rng) {
  const Eigen::MatrixXd noise = standard_normal(action_dim_, batch.size(), rng);
  CriticLoss l = critic_loss(batch, noise, true);
  const AdamConfig adam{cfg_.critic_lr};
  state_.critic1_opt.step(state_.critic1, l.grad1, adam);
  state_.critic2_opt.step(state_.critic2, l.grad2, adam);
  return l.loss;
}

double SacAgent::update_actor(const Batch& batch, Rng& rng, double* mean_log_prob) {
  const Eigen::MatrixXd noise = standard_normal(action_dim_, batch.size(), rng);
  ActorLoss l = actor_loss(batch, noise, true);
  state_.actor_opt.step(state_.actor, l.grad, AdamConfig{cfg_.actor_lr});
  if (mean_log_prob) *mean_log_prob = l.log_prob.mean();
  return l.loss;
}

double SacAgent::apply_temperature_step(double mean_log_prob) {
  const TemperatureLoss l = temperature_loss(mean_log_prob);
  state_.log_temperature =
      state_.temperature_opt.step(state_.log_temperature, l.grad, AdamConfig{cfg_.temperature_lr});
  return l.loss;
}

double SacAgent::update_temperature(const Batch& batch, Rng& rng) {
  if (batch.size() < 1) throw UsageError("temperature update needs a non-empty batch");
  const Eigen::MatrixXd noise = standard_normal(action_dim_, batch.size(), rng);
  const SquashedSample s = policy(batch.observations, noise);
  return apply_temperature_step(s.log_prob.mean());
}

void SacAgent::soft_update_targets(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError("soft_update_targets: tau must lie in (0, 1]");
  auto blend = [tau](MlpNetwork& target, const MlpNetwork& source) {
    auto& t = target.layers();
    const auto& s = source.layers();
    for (std::size_t l = 0; l < t.size(); ++l) {
      if (tau == 1.0) {
        t[l] = s[l];
        continue;
      }
      t[l].weight = tau * s[l].weight + (1.0 - tau) * t[l].weight;
      t[l].bias = tau * s[l].bias + (1.0 - tau) * t[l].bias;
    }
  };
  blend(state_.target1, state_.critic1);
  blend(state_.target2, state_.critic2);
}

void SacAgent::gradient_step(const Batch& batch, Rng& rng) {
  update_critics(batch, rng);
  double mean_log_prob = 0.0;
  update_actor(batch, rng, &mean_log_prob);
  apply_temperature_step(mean_log_prob);
  soft_update_targets(cfg_.tau);
  ++state_.update_count;
}

void SacAgent::save(std::ostream& out) const {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  io::write_u64(out, kCheckpointVersion);
  io::write_u64(out, static_cast<std::uint64_t>(observation_dim_));
  io::write_u64(out, static_cast<std::uint64_t>(action_dim_));
  io::write_network(out, state_.actor);
  io::write_network(out, state_.critic1);
  io::write_network(out, state_.critic2);
  io::write_network(out, state_.target1);
  io::write_network(out, state_.target2);
  io::write_f64(out, state_.log_temperature);
  state_.actor_opt.save(out);
  state_.critic1_opt.save(out);
  state_.critic2_opt.save(out);
  state_.temperature_opt.save(out);
  io::write_u64(out, state_.update_count);
  io::write_u64(out, state_.env_steps);
  if (!out) throw IoError("failed writing checkpoint");
}

void SacAgent::load(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw FormatError("not an agent checkpoint (bad magic)");
  }
  const auto version = io::read_u64(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto od = io::read_u64(in);
  const auto ad = io::read_u64(in);
  if (od != static_cast<std::uint64_t>(observation_dim_) || ad != static_cast<std::uint64_t>(action_dim_)) {
    throw FormatError("checkpoint dimensions do not match the agent");
  }
  SacState s;
  s.actor = io::read_network(in);
  s.critic1 = io::read_network(in);
  s.critic2 = io::read_network(in);
  s.target1 = io::read_network(in);
  s.target2 = io::read_network(in);
  s.log_temperature = io::read_f64(in);
  s.actor_opt.load(in);
  s.critic1_opt.load(in);
  s.critic2_opt.load(in);
  s.temperature_opt.load(in);
  s.update_count = io::read_u64(in);
  s.env_steps = io::read_u64(in);
  if (s.actor.sizes() != state_.actor.sizes() || s.critic1.sizes() != state_.critic1.sizes()) {
    throw FormatError("checkpoint network shapes do not match the agent configuration");
  }
  state_ = std::move(s);
}

void SacAgent::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  save(out);
}

void SacAgent::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  load(in);
}

}  // namespace rlihf
