#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "rlihf/rng.hpp"

namespace rlihf {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Fully-connected network with tanh between hidden layers and a linear
/// output. Inputs and outputs are column-major batches (features x batch).
class MlpNetwork {
 public:
  /// Activations recorded by forward() for a subsequent backward().
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input of every layer
  };

  MlpNetwork() = default;
  /// PyTorch-style init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  MlpNetwork(const std::vector<int>& sizes, Rng& rng);
  explicit MlpNetwork(std::vector<DenseLayer> layers);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  std::vector<int> sizes() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;

  /// Back-propagates `grad_out` (d loss / d output). Adds parameter gradients
  /// into `grad` when non-null and returns d loss / d input when requested.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_out, std::vector<DenseLayer>* grad,
                           bool want_input_grad) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  /// Zero-initialized gradient buffers shaped like this network.
  std::vector<DenseLayer> zero_like() const;

  bool operator==(const MlpNetwork& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);

/// Adaptive moment estimation with bias correction.
struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(const MlpNetwork& net);

  void step(MlpNetwork& net, const std::vector<DenseLayer>& grad, const AdamConfig& cfg);

  long steps() const { return steps_; }
  void save(std::ostream& out) const;
  void load(std::istream& in);
  bool operator==(const AdamOptimizer& other) const;

 private:
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  long steps_ = 0;
};

class ScalarAdam {
 public:
  double step(double value, double grad, const AdamConfig& cfg);

  long steps() const { return steps_; }
  void save(std::ostream& out) const;
  void load(std::istream& in);
  bool operator==(const ScalarAdam& other) const = default;

 private:
  double m_ = 0.0;
  double v_ = 0.0;
  long steps_ = 0;
};

namespace io {
void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
void read_matrix(std::istream& in, Eigen::MatrixXd& m);
void write_vector(std::ostream& out, const Eigen::VectorXd& v);
void read_vector(std::istream& in, Eigen::VectorXd& v);
void write_network(std::ostream& out, const MlpNetwork& net);
MlpNetwork read_network(std::istream& in);
void write_layers(std::ostream& out, const std::vector<DenseLayer>& layers);
std::vector<DenseLayer> read_layers(std::istream& in);
}  // namespace io

}  // namespace rlihf
