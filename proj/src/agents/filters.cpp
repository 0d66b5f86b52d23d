#include "afbc/agents/filters.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "afbc/errors.hpp"

namespace afbc {

std::vector<double> apply_filter(const FilterConfig& filter, std::span<const double> advantages,
                                 double advantage_scale) {
  std::vector<double> w(advantages.size());
  switch (filter.kind) {
    case FilterKind::kBinary:
    case FilterKind::kTTestAnnealed:
    case FilterKind::kClassifier:
      std::transform(advantages.begin(), advantages.end(), w.begin(),
                     [](double a) { return a > 0.0 ? 1.0 : 0.0; });
      break;
    case FilterKind::kExponential: {
      if (!(filter.beta > 0.0)) throw ConfigError("exponential filter needs beta > 0");
      const double scale = filter.popart_rescale ? advantage_scale : 1.0;
      std::transform(advantages.begin(), advantages.end(), w.begin(), [&](double a) {
        return std::min(std::exp(filter.beta * a / scale), filter.clip_max);
      });
      break;
    }
  }
  return w;
}

double paired_ttest_pvalue(std::span<const double> dataset_adv,
                           std::span<const double> policy_adv) {
  if (dataset_adv.size() != policy_adv.size() || dataset_adv.size() < 2) {
    throw ConfigError("paired t-test needs k >= 2 paired samples");
  }
  const auto k = static_cast<double>(dataset_adv.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < dataset_adv.size(); ++i) mean += dataset_adv[i] - policy_adv[i];
  mean /= k;
  double ss = 0.0;
  for (std::size_t i = 0; i < dataset_adv.size(); ++i) {
    const double d = dataset_adv[i] - policy_adv[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (k - 1.0));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return mean > 0.0 ? 0.0 : 1.0;
  const double t = mean / (sd / std::sqrt(k));
  boost::math::students_t dist(k - 1.0);
  return boost::math::cdf(boost::math::complement(dist, t));
}

bool ttest_approves(std::span<const double> dataset_adv, std::span<const double> policy_adv,
                    double p_threshold) {
  if (p_threshold >= 1.0) return true;
  return paired_ttest_pvalue(dataset_adv, policy_adv) <= p_threshold;
}

double ttest_threshold(const FilterConfig& filter, std::uint64_t step, std::uint64_t total) {
  const double horizon = filter.ttest_anneal_fraction * static_cast<double>(total);
  const double frac = horizon > 0.0 ? std::min(1.0, static_cast<double>(step) / horizon) : 1.0;
  return filter.ttest_p_start + (filter.ttest_p_end - filter.ttest_p_start) * frac;
}

std::vector<double> uncertainty_weights(const Matrix& member_values, double tau_temp) {
  const Eigen::Index n = member_values.rows();
  const Eigen::Index batch = member_values.cols();
  std::vector<double> logits(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mean = member_values.col(b).mean();
    const double var =
        n > 1 ? (member_values.col(b).array() - mean).square().sum() / static_cast<double>(n - 1)
              : 0.0;
    logits[static_cast<std::size_t>(b)] = tau_temp * std::sqrt(var);
  }
  const double top = logits.empty() ? 0.0 : *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - top);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

double weighted_critic_loss(const Matrix& predictions, const Vector& targets,
                            std::span<const double> weights) {
  const Eigen::Index batch = predictions.cols();
  if (targets.size() != batch || static_cast<Eigen::Index>(weights.size()) != batch) {
    throw ConfigError("weighted_critic_loss: batch sizes disagree");
  }
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double sq = (predictions.col(b).array() - targets(b)).square().sum();
    loss += weights[static_cast<std::size_t>(b)] * 0.5 * sq;
  }
  return loss / static_cast<double>(batch);
}

double redq_target(std::span<const double> member_values, std::span<const std::size_t> subset,
                   double reward, bool done, double gamma) {
  if (subset.empty()) throw ConfigError("redq_target needs a non-empty subset");
  double lowest = member_values[subset[0]];
  for (std::size_t j : subset) lowest = std::min(lowest, member_values[j]);
  return reward + gamma * (done ? 0.0 : 1.0) * lowest;
}

// ------------------------------------------------------------ classifier

AdvantageClassifier::AdvantageClassifier(int input_width, const std::vector<int>& hidden,
                                         const FilterConfig& filter, Rng& rng)
    : threshold_(filter.classifier_threshold), max_std_(filter.classifier_max_std) {
  if (filter.classifier_members < 1) throw ConfigError("classifier ensemble needs members >= 1");
  std::vector<int> sizes{input_width};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (int m = 0; m < filter.classifier_members; ++m) {
    nets_.push_back(numkit::MlpNet::uniform_init(sizes, rng));
    // Start every member at p = 0.5 so an untrained ensemble approves nothing.
    nets_.back().output_layer().weight.setZero();
    nets_.back().output_layer().bias.setZero();
    opts_.emplace_back(nets_.back(), numkit::AdamConfig{filter.classifier_lr});
  }
}

double AdvantageClassifier::update(const Matrix& inputs, std::span<const double> labels) {
  const Eigen::Index batch = inputs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch) {
    throw ConfigError("classifier update: label count differs from batch");
  }
  double total = 0.0;
  numkit::ForwardCache cache;
  numkit::GradTape tape;
  for (std::size_t m = 0; m < nets_.size(); ++m) {
    const Matrix& logits = nets_[m].forward(inputs, cache);
    Matrix grad(1, batch);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const double z = logits(0, b);
      const double y = labels[static_cast<std::size_t>(b)];
      // Stable BCE with logits: max(z, 0) - z y + log(1 + exp(-|z|)).
      loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      grad(0, b) = (1.0 / (1.0 + std::exp(-z)) - y) / static_cast<double>(batch);
    }
    numkit::backward(nets_[m], cache, grad, tape);
    numkit::adam_step(nets_[m], tape, opts_[m]);
    total += loss / static_cast<double>(batch);
  }
  return total / static_cast<double>(nets_.size());
}

std::vector<AdvantageClassifier::Prediction> AdvantageClassifier::predict(
    const Matrix& inputs) const {
  const Eigen::Index batch = inputs.cols();
  Matrix probs(static_cast<Eigen::Index>(nets_.size()), batch);
  for (std::size_t m = 0; m < nets_.size(); ++m) {
    const Matrix logits = nets_[m].forward(inputs);
    probs.row(static_cast<Eigen::Index>(m)) = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
  }
  std::vector<Prediction> out(static_cast<std::size_t>(batch));
  const double n = static_cast<double>(nets_.size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mean = probs.col(b).mean();
    const double var = (probs.col(b).array() - mean).square().sum() / n;
    out[static_cast<std::size_t>(b)] = {mean, std::sqrt(var)};
  }
  return out;
}

std::vector<bool> AdvantageClassifier::approve(const Matrix& inputs) const {
  const auto preds = predict(inputs);
  std::vector<bool> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out[i] = preds[i].mean > threshold_ && preds[i].stddev < max_std_;
  }
  return out;
}

}  // namespace afbc
