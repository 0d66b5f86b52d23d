#ifndef AFBC_NUMKIT_MLP_HPP
#define AFBC_NUMKIT_MLP_HPP

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "afbc/rng.hpp"

namespace afbc::numkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Batches are column-major: one column per sample, one row per feature.

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// Intermediate activations of one batched forward pass. activations[0] is the
// input, activations[l + 1] the (post-ReLU for hidden layers) output of layer l.
struct ForwardCache {
  std::vector<Matrix> activations;

  bool empty() const { return activations.empty(); }
  const Matrix& output() const { return activations.back(); }
};

/// Fully connected network: ReLU on hidden layers, identity on the output.
class MlpNet {
 public:
  MlpNet() = default;

  /// Zero-initialized network. Throws ConfigError on empty or non-positive widths.
  explicit MlpNet(std::vector<int> layer_sizes);

  /// Uniform fan-in initialization, bound = 1/sqrt(fan_in) for weights and biases.
  static MlpNet uniform_init(std::vector<int> layer_sizes, Rng& rng);

  int input_width() const { return sizes_.front(); }
  int output_width() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t layer_count() const { return layers_.size(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& output_layer() { return layers_.back(); }
  const DenseLayer& output_layer() const { return layers_.back(); }

  Vector forward(const Vector& input) const;
  Matrix forward(const Matrix& inputs) const;

  // Forward pass that records what backward() needs.
  const Matrix& forward(const Matrix& inputs, ForwardCache& cache) const;

  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  bool all_finite() const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

/// Per-parameter gradient accumulators with the same shapes as an MlpNet.
class GradTape {
 public:
  GradTape() = default;
  explicit GradTape(const MlpNet& net);

  void zero();
  bool matches(const MlpNet& net) const;
  bool all_finite() const;
  std::vector<double> flat() const;

  std::vector<DenseLayer>& grads() { return grads_; }
  const std::vector<DenseLayer>& grads() const { return grads_; }

 private:
  std::vector<DenseLayer> grads_;
};

/// Reverse pass: overwrites `tape` with dLoss/dParameter given dLoss/dOutput
/// for every sample in the cached batch. Returns dLoss/dInput.
/// Throws UsageError if `cache` holds no forward pass for this net.
Matrix backward(const MlpNet& net, const ForwardCache& cache, const Matrix& output_grad,
                GradTape& tape);

/// target <- (1 - tau) * target + tau * online, parameter-wise.
void polyak_update(MlpNet& target, const MlpNet& online, double tau);

}  // namespace afbc::numkit

#endif  // AFBC_NUMKIT_MLP_HPP
