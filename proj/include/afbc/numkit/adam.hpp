#ifndef AFBC_NUMKIT_ADAM_HPP
#define AFBC_NUMKIT_ADAM_HPP

#include <cstdint>
#include <vector>

#include "afbc/numkit/mlp.hpp"

namespace afbc::numkit {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const MlpNet& net, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<DenseLayer>& first_moment() const { return m_; }
  const std::vector<DenseLayer>& second_moment() const { return v_; }

 private:
  friend void adam_step(MlpNet&, const GradTape&, AdamState&);

  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
};

/// Bias-corrected Adam update. Throws NumericError on non-finite gradients or
/// if the step leaves a non-finite parameter behind.
void adam_step(MlpNet& net, const GradTape& tape, AdamState& state);

}  // namespace afbc::numkit

#endif  // AFBC_NUMKIT_ADAM_HPP
