#include "afbc/numkit/mlp.hpp"

#include <cmath>
#include <string>

#include "afbc/errors.hpp"

namespace afbc::numkit {

MlpNet::MlpNet(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) {
    throw ConfigError("MlpNet needs at least an input and an output width");
  }
  for (int w : sizes_) {
    if (w <= 0) throw ConfigError("MlpNet layer widths must be positive");
  }
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layers_.push_back({Matrix::Zero(sizes_[l + 1], sizes_[l]), Vector::Zero(sizes_[l + 1])});
  }
}

MlpNet MlpNet::uniform_init(std::vector<int> layer_sizes, Rng& rng) {
  MlpNet net(std::move(layer_sizes));
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = dist(rng);
  }
  return net;
}

void MlpNet::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw UsageError("forward on an empty MlpNet");
  if (rows != sizes_.front()) {
    throw ConfigError("MlpNet input width " + std::to_string(rows) + " != expected " +
                      std::to_string(sizes_.front()));
  }
}

Vector MlpNet::forward(const Vector& input) const {
  check_input(input.size());
  Vector h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].weight * h + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Matrix MlpNet::forward(const Matrix& inputs) const {
  check_input(inputs.rows());
  Matrix h = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z(layers_[l].weight.rows(), h.cols());
    z.noalias() = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

const Matrix& MlpNet::forward(const Matrix& inputs, ForwardCache& cache) const {
  check_input(inputs.rows());
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix& z = cache.activations[l + 1];
    z.resize(layers_[l].weight.rows(), inputs.cols());
    z.noalias() = layers_[l].weight * cache.activations[l];
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
  }
  return cache.activations.back();
}

std::size_t MlpNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<double> MlpNet::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

void MlpNet::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ConfigError("parameter vector length " + std::to_string(values.size()) +
                      " != " + std::to_string(parameter_count()));
  }
  std::size_t k = 0;
  for (auto& layer : layers_) {
    std::copy_n(values.data() + k, layer.weight.size(), layer.weight.data());
    k += layer.weight.size();
    std::copy_n(values.data() + k, layer.bias.size(), layer.bias.data());
    k += layer.bias.size();
  }
}

bool MlpNet::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

GradTape::GradTape(const MlpNet& net) {
  grads_.reserve(net.layer_count());
  for (const auto& layer : net.layers()) {
    grads_.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                      Vector::Zero(layer.bias.size())});
  }
}

void GradTape::zero() {
  for (auto& g : grads_) {
    g.weight.setZero();
    g.bias.setZero();
  }
}

bool GradTape::matches(const MlpNet& net) const {
  if (grads_.size() != net.layer_count()) return false;
  for (std::size_t l = 0; l < grads_.size(); ++l) {
    const auto& p = net.layers()[l];
    if (grads_[l].weight.rows() != p.weight.rows() || grads_[l].weight.cols() != p.weight.cols() ||
        grads_[l].bias.size() != p.bias.size()) {
      return false;
    }
  }
  return true;
}

bool GradTape::all_finite() const {
  for (const auto& g : grads_) {
    if (!g.weight.allFinite() || !g.bias.allFinite()) return false;
  }
  return true;
}

std::vector<double> GradTape::flat() const {
  std::vector<double> out;
  for (const auto& g : grads_) {
    out.insert(out.end(), g.weight.data(), g.weight.data() + g.weight.size());
    out.insert(out.end(), g.bias.data(), g.bias.data() + g.bias.size());
  }
  return out;
}

Matrix backward(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad,
                GradTape& tape) {
  if (cache.activations.size() != net.layer_count() + 1) {
    throw UsageError("backward called without a matching forward pass");
  }
  if (output_grad.rows() != net.output_width() || output_grad.cols() != cache.output().cols()) {
    throw ConfigError("output gradient shape does not match the cached batch");
  }
  if (!tape.matches(net)) tape = GradTape(net);

  Matrix delta = output_grad;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const Matrix& input = cache.activations[l];
    auto& g = tape.grads()[l];
    g.weight.noalias() = delta * input.transpose();
    g.bias = delta.rowwise().sum();
    Matrix upstream(input.rows(), delta.cols());
    upstream.noalias() = net.layers()[l].weight.transpose() * delta;
    if (l > 0) {
      // ReLU mask: the cached hidden activation is positive exactly where it passed.
      upstream = (input.array() > 0.0).select(upstream, 0.0);
    }
    delta = std::move(upstream);
  }
  return delta;
}

void polyak_update(MlpNet& target, const MlpNet& online, double tau) {
  if (target.layer_sizes() != online.layer_sizes()) {
    throw ConfigError("polyak_update between networks of different shapes");
  }
  for (std::size_t l = 0; l < target.layer_count(); ++l) {
    auto& t = target.layers()[l];
    const auto& o = online.layers()[l];
    t.weight = (1.0 - tau) * t.weight + tau * o.weight;
    t.bias = (1.0 - tau) * t.bias + tau * o.bias;
  }
}

}  // namespace afbc::numkit
