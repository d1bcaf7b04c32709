#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "rlihf/rng.hpp"

namespace rlihf {

struct Transition {
  Eigen::VectorXd observation;
  Eigen::VectorXd action;
  double r_total = 0.0;
  Eigen::VectorXd next_observation;
  bool terminal = false;
};

/// Column-major minibatch: one transition per column.
struct Batch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_observations;
  Eigen::VectorXd terminals;  // 1.0 for terminal transitions

  int size() const { return static_cast<int>(rewards.size()); }
  static Batch from(const std::vector<Transition>& transitions);
};

/// Fixed-capacity ring of transitions with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int observation_dim, int action_dim);

  void push(const Transition& t);
  Batch sample(int batch_size, Rng& rng) const;
  Transition at(std::size_t index) const;  // index in insertion order, 0 = oldest

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t slot(std::size_t index) const;

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next slot to write
  Eigen::MatrixXd observations_;
  Eigen::MatrixXd actions_;
  Eigen::VectorXd rewards_;
  Eigen::MatrixXd next_observations_;
  Eigen::VectorXd terminals_;
};

/// Uniform index in [0, n) by rejection on 64-bit draws.
std::size_t uniform_index(std::size_t n, Rng& rng);

}  // namespace rlihf
