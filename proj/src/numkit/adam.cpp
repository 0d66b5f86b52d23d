#include "afbc/numkit/adam.hpp"

#include <cmath>
#include <string>

#include "afbc/errors.hpp"

namespace afbc::numkit {

AdamState::AdamState(const MlpNet& net, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be positive");
  for (const auto& layer : net.layers()) {
    m_.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                  Vector::Zero(layer.bias.size())});
  }
  v_ = m_;
}

namespace {

template <typename Param, typename Grad, typename Moment>
void update_block(Param& p, const Grad& g, Moment& m, Moment& v, const AdamConfig& c,
                  double correction1, double correction2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
  const double step = c.learning_rate / correction1;
  p.array() -= step * m.array() / ((v.array() / correction2).sqrt() + c.eps);
}

}  // namespace

void adam_step(MlpNet& net, const GradTape& tape, AdamState& state) {
  if (!tape.matches(net) || state.m_.size() != net.layer_count()) {
    throw ConfigError("adam_step: gradient/optimizer shapes do not match the network");
  }
  if (!tape.all_finite()) {
    throw NumericError("adam_step: non-finite gradient at optimizer step " +
                       std::to_string(state.step_ + 1));
  }
  ++state.step_;
  const auto& c = state.config_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto& p = net.layers()[l];
    const auto& g = tape.grads()[l];
    update_block(p.weight, g.weight, state.m_[l].weight, state.v_[l].weight, c, correction1,
                 correction2);
    update_block(p.bias, g.bias, state.m_[l].bias, state.v_[l].bias, c, correction1, correction2);
  }
  if (!net.all_finite()) {
    throw NumericError("adam_step: non-finite parameter after optimizer step " +
                       std::to_string(state.step_));
  }
}

}  // namespace afbc::numkit
