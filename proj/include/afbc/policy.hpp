#ifndef AFBC_POLICY_HPP
#define AFBC_POLICY_HPP

#include <span>
#include <vector>

#include "afbc/numkit/mlp.hpp"
#include "afbc/rng.hpp"

namespace afbc {

using numkit::Matrix;
using numkit::Vector;

struct PolicyConfig {
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  double squash_eps = 1e-6;    // inside log(1 - tanh(u)^2 + eps)
  double action_clamp = 1e-6;  // foreign actions clamped into (-1 + c, 1 - c)
  double log_prob_clip = 1000.0;

  bool operator==(const PolicyConfig&) const = default;
};

/// Tanh-squashed diagonal Gaussian. The trunk emits [mean; log_std] per
/// action dimension; log_std is hard-clamped into [log_std_min, log_std_max].
class SquashedGaussianPolicy {
 public:
  struct Sample {
    Vector action;
    double log_prob;
  };

  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(numkit::MlpNet trunk, PolicyConfig config = {});

  static SquashedGaussianPolicy create(int state_dim, int action_dim,
                                       const std::vector<int>& hidden, Rng& rng,
                                       PolicyConfig config = {});

  int state_dim() const { return trunk_.input_width(); }
  int action_dim() const { return trunk_.output_width() / 2; }
  const PolicyConfig& config() const { return config_; }
  numkit::MlpNet& trunk() { return trunk_; }
  const numkit::MlpNet& trunk() const { return trunk_; }

  Sample sample_action(const Vector& state, Rng& rng) const;
  Vector mean_action(const Vector& state) const;
  double log_prob(const Vector& state, const Vector& foreign_action) const;

  // Batched variants; one column per sample.
  Matrix sample_actions(const Matrix& states, Rng& rng) const;
  Matrix mean_actions(const Matrix& states) const;
  std::vector<double> log_probs(const Matrix& states, const Matrix& actions) const;

  /// loss = (1/B) sum_i w_i * (-log pi(a_i | s_i)). Writes dLoss/dTrunk into
  /// `tape` and returns the loss. Samples whose log-prob hits the clip get no
  /// gradient.
  double weighted_nll_backward(const Matrix& states, const Matrix& actions,
                               std::span<const double> weights, numkit::GradTape& tape) const;

 private:
  void check_output(const Matrix& out) const;
  void validate_actions(const Matrix& actions) const;

  numkit::MlpNet trunk_;
  PolicyConfig config_;
};

}  // namespace afbc

#endif  // AFBC_POLICY_HPP
