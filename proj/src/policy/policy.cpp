#include "afbc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "afbc/errors.hpp"

namespace afbc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

// tanh rounds to +-1 for |u| > ~19; keep samples inside the open box.
double squash(double u) {
  const double edge = std::nextafter(1.0, 0.0);
  return std::clamp(std::tanh(u), -edge, edge);
}

struct LogProbTerms {
  double value;
  double d_mean;     // d value / d mean
  double d_log_std;  // d value / d (clamped) log_std
};

// log N(u; mean, std) for one coordinate.
LogProbTerms gaussian_log_density(double u, double mean, double log_std) {
  const double inv_std = std::exp(-log_std);
  const double z = (u - mean) * inv_std;
  return {-0.5 * z * z - log_std - kHalfLog2Pi, z * inv_std, z * z - 1.0};
}

}  // namespace

SquashedGaussianPolicy::SquashedGaussianPolicy(numkit::MlpNet trunk, PolicyConfig config)
    : trunk_(std::move(trunk)), config_(config) {
  if (trunk_.output_width() % 2 != 0) {
    throw ConfigError("policy trunk must emit [mean; log_std] (even output width)");
  }
  if (!(config_.log_std_min < config_.log_std_max)) {
    throw ConfigError("policy log_std_min must be below log_std_max");
  }
}

SquashedGaussianPolicy SquashedGaussianPolicy::create(int state_dim, int action_dim,
                                                      const std::vector<int>& hidden, Rng& rng,
                                                      PolicyConfig config) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * action_dim);
  return SquashedGaussianPolicy(numkit::MlpNet::uniform_init(sizes, rng), config);
}

void SquashedGaussianPolicy::check_output(const Matrix& out) const {
  if (!out.allFinite()) throw NumericError("policy trunk produced a non-finite output");
}

void SquashedGaussianPolicy::validate_actions(const Matrix& actions) const {
  if (actions.rows() != action_dim()) {
    throw ConfigError("action width " + std::to_string(actions.rows()) + " != policy width " +
                      std::to_string(action_dim()));
  }
  const double limit = 1.0 + 1e-6;
  for (Eigen::Index i = 0; i < actions.size(); ++i) {
    const double a = actions.data()[i];
    if (!(std::abs(a) <= limit)) {
      throw DataError("foreign action " + std::to_string(a) + " outside [-1, 1]");
    }
  }
}

SquashedGaussianPolicy::Sample SquashedGaussianPolicy::sample_action(const Vector& state,
                                                                     Rng& rng) const {
  Vector out = trunk_.forward(state);
  check_output(out);
  const int k = action_dim();
  Sample s{Vector(k), 0.0};
  for (int d = 0; d < k; ++d) {
    const double log_std = std::clamp(out(k + d), config_.log_std_min, config_.log_std_max);
    const double u = out(d) + std::exp(log_std) * standard_normal(rng);
    const double a = squash(u);
    s.action(d) = a;
    s.log_prob += gaussian_log_density(u, out(d), log_std).value -
                  std::log(1.0 - a * a + config_.squash_eps);
  }
  return s;
}

Vector SquashedGaussianPolicy::mean_action(const Vector& state) const {
  Vector out = trunk_.forward(state);
  check_output(out);
  return out.head(action_dim()).array().tanh();
}

double SquashedGaussianPolicy::log_prob(const Vector& state, const Vector& foreign_action) const {
  Matrix s = state;
  Matrix a = foreign_action;
  return log_probs(s, a).front();
}

Matrix SquashedGaussianPolicy::sample_actions(const Matrix& states, Rng& rng) const {
  Matrix out = trunk_.forward(states);
  check_output(out);
  const int k = action_dim();
  Matrix actions(k, states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    for (int d = 0; d < k; ++d) {
      const double log_std = std::clamp(out(k + d, j), config_.log_std_min, config_.log_std_max);
      actions(d, j) = squash(out(d, j) + std::exp(log_std) * standard_normal(rng));
    }
  }
  return actions;
}

Matrix SquashedGaussianPolicy::mean_actions(const Matrix& states) const {
  Matrix out = trunk_.forward(states);
  check_output(out);
  return out.topRows(action_dim()).array().tanh();
}

std::vector<double> SquashedGaussianPolicy::log_probs(const Matrix& states,
                                                      const Matrix& actions) const {
  validate_actions(actions);
  Matrix out = trunk_.forward(states);
  check_output(out);
  const int k = action_dim();
  const double edge = 1.0 - config_.action_clamp;
  const double clip = std::nextafter(config_.log_prob_clip, 0.0);
  std::vector<double> result(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    double lp = 0.0;
    for (int d = 0; d < k; ++d) {
      const double a = std::clamp(actions(d, j), -edge, edge);
      const double log_std = std::clamp(out(k + d, j), config_.log_std_min, config_.log_std_max);
      lp += gaussian_log_density(std::atanh(a), out(d, j), log_std).value -
            std::log(1.0 - a * a + config_.squash_eps);
    }
    result[static_cast<std::size_t>(j)] = std::clamp(lp, -clip, clip);
  }
  return result;
}

double SquashedGaussianPolicy::weighted_nll_backward(const Matrix& states, const Matrix& actions,
                                                     std::span<const double> weights,
                                                     numkit::GradTape& tape) const {
  validate_actions(actions);
  const Eigen::Index batch = states.cols();
  if (static_cast<Eigen::Index>(weights.size()) != batch || actions.cols() != batch) {
    throw ConfigError("weighted_nll_backward: batch sizes disagree");
  }
  numkit::ForwardCache cache;
  const Matrix& out = trunk_.forward(states, cache);
  check_output(out);

  const int k = action_dim();
  const double edge = 1.0 - config_.action_clamp;
  const double clip = config_.log_prob_clip;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  Matrix grad = Matrix::Zero(2 * k, batch);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    double lp = 0.0;
    for (int d = 0; d < k; ++d) {
      const double a = std::clamp(actions(d, j), -edge, edge);
      const double raw_log_std = out(k + d, j);
      const double log_std = std::clamp(raw_log_std, config_.log_std_min, config_.log_std_max);
      const auto terms = gaussian_log_density(std::atanh(a), out(d, j), log_std);
      lp += terms.value - std::log(1.0 - a * a + config_.squash_eps);
      const double w = weights[static_cast<std::size_t>(j)] * inv_batch;
      grad(d, j) = -w * terms.d_mean;
      const bool inside = raw_log_std >= config_.log_std_min && raw_log_std <= config_.log_std_max;
      grad(k + d, j) = inside ? -w * terms.d_log_std : 0.0;
    }
    if (lp <= -clip || lp >= clip) {
      lp = std::clamp(lp, -std::nextafter(clip, 0.0), std::nextafter(clip, 0.0));
      grad.col(j).setZero();
    }
    loss -= weights[static_cast<std::size_t>(j)] * lp;
  }
  numkit::backward(trunk_, cache, grad, tape);
  return loss * inv_batch;
}

}  // namespace afbc
