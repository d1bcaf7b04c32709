#include "rlihf/replay_buffer.hpp"

#include <limits>

#include "rlihf/errors.hpp"

namespace rlihf {

Batch Batch::from(const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw UsageError("batch must contain at least one transition");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto od = transitions.front().observation.size();
  const auto ad = transitions.front().action.size();
  Batch b;
  b.observations.resize(od, n);
  b.actions.resize(ad, n);
  b.rewards.resize(n);
  b.next_observations.resize(od, n);
  b.terminals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = transitions[i];
    if (t.observation.size() != od || t.next_observation.size() != od || t.action.size() != ad) {
      throw InputError("batch transitions have inconsistent dimensions");
    }
    b.observations.col(i) = t.observation;
    b.actions.col(i) = t.action;
    b.rewards[i] = t.r_total;
    b.next_observations.col(i) = t.next_observation;
    b.terminals[i] = t.terminal ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int observation_dim, int action_dim)
    : capacity_(capacity),
      observations_(observation_dim, static_cast<Eigen::Index>(capacity)),
      actions_(action_dim, static_cast<Eigen::Index>(capacity)),
      rewards_(static_cast<Eigen::Index>(capacity)),
      next_observations_(observation_dim, static_cast<Eigen::Index>(capacity)),
      terminals_(static_cast<Eigen::Index>(capacity)) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.observation.size() != observations_.rows() || t.next_observation.size() != observations_.rows() ||
      t.action.size() != actions_.rows()) {
    throw InputError("transition dimensions do not match the replay buffer");
  }
  const auto c = static_cast<Eigen::Index>(head_);
  observations_.col(c) = t.observation;
  actions_.col(c) = t.action;
  rewards_[c] = t.r_total;
  next_observations_.col(c) = t.next_observation;
  terminals_[c] = t.terminal ? 1.0 : 0.0;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

std::size_t ReplayBuffer::slot(std::size_t index) const {
  // oldest element sits at head_ once the ring is full
  return size_ < capacity_ ? index : (head_ + index) % capacity_;
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw UsageError("replay buffer index out of range");
  const auto c = static_cast<Eigen::Index>(slot(index));
  return {observations_.col(c), actions_.col(c), rewards_[c], next_observations_.col(c), terminals_[c] != 0.0};
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ == 0) throw UsageError("cannot sample from an empty replay buffer");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  Batch b;
  b.observations.resize(observations_.rows(), batch_size);
  b.actions.resize(actions_.rows(), batch_size);
  b.rewards.resize(batch_size);
  b.next_observations.resize(observations_.rows(), batch_size);
  b.terminals.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const auto c = static_cast<Eigen::Index>(uniform_index(size_, rng));
    b.observations.col(i) = observations_.col(c);
    b.actions.col(i) = actions_.col(c);
    b.rewards[i] = rewards_[c];
    b.next_observations.col(i) = next_observations_.col(c);
    b.terminals[i] = terminals_[c];
  }
  return b;
}

}  // namespace rlihf
