#include "rlihf/mlp.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "rlihf/errors.hpp"

namespace rlihf {

MlpNetwork::MlpNetwork(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ConfigError("network needs at least an input and an output size");
  for (int s : sizes) {
    if (s <= 0) throw ConfigError("network layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int c = 0; c < in; ++c) {
      for (int r = 0; r < out; ++r) layer.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
    }
    for (int r = 0; r < out; ++r) layer.bias[r] = (2.0 * uniform01(rng) - 1.0) * bound;
    layers_.push_back(std::move(layer));
  }
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw FormatError("network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows() ||
        (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())) {
      throw FormatError("network layer shapes are inconsistent");
    }
  }
}

std::vector<int> MlpNetwork::sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& layer : layers_) s.push_back(static_cast<int>(layer.weight.rows()));
  return s;
}

Eigen::MatrixXd MlpNetwork::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.rows() != input_dim()) throw InputError("network input has wrong dimension");
  if (tape) tape->inputs.resize(layers_.size());
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) {
      // tanh(z) = 1 - 2 / (exp(2z) + 1); Eigen vectorizes exp but not tanh in double
      z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
    }
    if (tape) {
      tape->inputs[l] = std::move(h);
    }
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd MlpNetwork::backward(const Tape& tape, const Eigen::MatrixXd& grad_out,
                                     std::vector<DenseLayer>* grad, bool want_input_grad) const {
  Eigen::MatrixXd dz = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = tape.inputs[l];
    if (grad) {
      (*grad)[l].weight.noalias() += dz * input.transpose();
      (*grad)[l].bias += dz.rowwise().sum();
    }
    if (l == 0 && !want_input_grad) return {};
    Eigen::MatrixXd dx = layers_[l].weight.transpose() * dz;
    if (l == 0) return dx;
    // input of layer l is tanh output of layer l-1
    dz = dx.array() * (1.0 - input.array().square());
  }
  return {};
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  Eigen::VectorXd flat(n);
  Eigen::Index pos = 0;
  for (const auto& layer : layers) {
    flat.segment(pos, layer.weight.size()) = Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
    pos += layer.weight.size();
    flat.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return flat;
}

Eigen::VectorXd MlpNetwork::flatten() const { return rlihf::flatten(layers_); }

void MlpNetwork::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw InputError("assign: parameter vector has wrong length");
  }
  Eigen::Index pos = 0;
  for (auto& layer : layers_) {
    Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()) = flat.segment(pos, layer.weight.size());
    pos += layer.weight.size();
    layer.bias = flat.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
}

std::vector<DenseLayer> MlpNetwork::zero_like() const {
  std::vector<DenseLayer> g;
  g.reserve(layers_.size());
  for (const auto& layer : layers_) {
    g.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                 Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return g;
}

bool MlpNetwork::operator==(const MlpNetwork& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

AdamOptimizer::AdamOptimizer(const MlpNetwork& net) : m_(net.zero_like()), v_(net.zero_like()) {}

void AdamOptimizer::step(MlpNetwork& net, const std::vector<DenseLayer>& grad, const AdamConfig& cfg) {
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps_));
  const double lr = cfg.learning_rate;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m.array() = cfg.beta1 * m.array() + (1.0 - cfg.beta1) * g.array();
    v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, m_[l].weight, v_[l].weight, grad[l].weight);
    update(layers[l].bias, m_[l].bias, v_[l].bias, grad[l].bias);
  }
}

void AdamOptimizer::save(std::ostream& out) const {
  io::write_u64(out, static_cast<std::uint64_t>(steps_));
  io::write_layers(out, m_);
  io::write_layers(out, v_);
}

void AdamOptimizer::load(std::istream& in) {
  steps_ = static_cast<long>(io::read_u64(in));
  m_ = io::read_layers(in);
  v_ = io::read_layers(in);
}

bool AdamOptimizer::operator==(const AdamOptimizer& other) const {
  return steps_ == other.steps_ && flatten(m_) == flatten(other.m_) && flatten(v_) == flatten(other.v_);
}

double ScalarAdam::step(double value, double grad, const AdamConfig& cfg) {
  ++steps_;
  m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
  v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad * grad;
  const double mhat = m_ / (1.0 - std::pow(cfg.beta1, static_cast<double>(steps_)));
  const double vhat = v_ / (1.0 - std::pow(cfg.beta2, static_cast<double>(steps_)));
  return value - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
}

void ScalarAdam::save(std::ostream& out) const {
  io::write_f64(out, m_);
  io::write_f64(out, v_);
  io::write_u64(out, static_cast<std::uint64_t>(steps_));
}

void ScalarAdam::load(std::istream& in) {
  m_ = io::read_f64(in);
  v_ = io::read_f64(in);
  steps_ = static_cast<long>(io::read_u64(in));
}

namespace io {

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof v);
  std::memcpy(&bits, &v, sizeof v);
  write_u64(out, bits);
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) write_f64(out, m.data()[i]);
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError("checkpoint matrix shape is implausible");
  m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f64(in);
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v[i]);
}

void read_vector(std::istream& in, Eigen::VectorXd& v) {
  const auto n = read_u64(in);
  if (n > (1u << 28)) throw FormatError("checkpoint vector length is implausible");
  v.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f64(in);
}

void write_layers(std::ostream& out, const std::vector<DenseLayer>& layers) {
  write_u64(out, layers.size());
  for (const auto& layer : layers) {
    write_matrix(out, layer.weight);
    write_vector(out, layer.bias);
  }
}

std::vector<DenseLayer> read_layers(std::istream& in) {
  const auto n = read_u64(in);
  if (n > 64) throw FormatError("checkpoint layer count is implausible");
  std::vector<DenseLayer> layers(n);
  for (auto& layer : layers) {
    read_matrix(in, layer.weight);
    read_vector(in, layer.bias);
  }
  return layers;
}

void write_network(std::ostream& out, const MlpNetwork& net) { write_layers(out, net.layers()); }

MlpNetwork read_network(std::istream& in) { return MlpNetwork(read_layers(in)); }

}  // namespace io

}  // namespace rlihf
