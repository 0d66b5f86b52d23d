#ifndef AFBC_AGENTS_FILTERS_HPP
#define AFBC_AGENTS_FILTERS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "afbc/numkit/adam.hpp"
#include "afbc/numkit/mlp.hpp"
#include "afbc/rng.hpp"

namespace afbc {

using numkit::Matrix;
using numkit::Vector;

enum class FilterKind { kBinary, kExponential, kTTestAnnealed, kClassifier };

struct FilterConfig {
  FilterKind kind = FilterKind::kBinary;

  // exponential: min(exp(beta * A), clip_max), A optionally divided by the
  // critics' PopArt scale.
  double beta = 1.0;
  double clip_max = 20.0;
  bool popart_rescale = false;

  // t-test: k paired advantage estimates; the confidence threshold is annealed
  // linearly from p_start to p_end over the first anneal_fraction of training.
  int ttest_k = 4;
  double ttest_p_start = 1.0;
  double ttest_p_end = 0.05;
  double ttest_anneal_fraction = 0.5;

  // classifier: approve iff ensemble mean confidence > threshold and ensemble
  // std < max_std.
  int classifier_members = 3;
  double classifier_threshold = 0.6;
  double classifier_max_std = 0.2;
  double classifier_lr = 1e-3;

  bool operator==(const FilterConfig&) const = default;
};

/// Per-sample BC weights for the advantage-based filters.
///   binary      -> 1{A > 0}
///   exponential -> min(exp(beta * A / scale), clip_max), scale = 1 unless
///                  popart_rescale is set, in which case `advantage_scale` is
///                  the critics' PopArt sigma.
/// The t-test and classifier filters need an agent; see AfbcAgent.
std::vector<double> apply_filter(const FilterConfig& filter, std::span<const double> advantages,
                                 double advantage_scale = 1.0);

/// One-sided paired t-test of H1: mean(dataset - policy) > 0. Returns the
/// p-value; zero-variance differences give 0 if the mean difference is
/// positive and 1 otherwise.
double paired_ttest_pvalue(std::span<const double> dataset_advantages,
                           std::span<const double> policy_advantages);

/// p_threshold >= 1 approves unconditionally.
bool ttest_approves(std::span<const double> dataset_advantages,
                    std::span<const double> policy_advantages, double p_threshold);

/// Linearly annealed confidence threshold at training step `step` of `total`.
double ttest_threshold(const FilterConfig& filter, std::uint64_t step, std::uint64_t total);

/// softmax over the batch of tau * (std across ensemble members), computed from
/// an n x B matrix of member values.
std::vector<double> uncertainty_weights(const Matrix& member_values, double tau_temp);

/// mean_b w_b * 0.5 * sum_i (Q_i(b) - y_b)^2 over an n x B matrix of critic
/// predictions. Unit weights give the plain clipped double-Q loss.
double weighted_critic_loss(const Matrix& predictions, const Vector& targets,
                            std::span<const double> weights);

/// r + gamma * (1 - done) * min over `subset` of member_values.
double redq_target(std::span<const double> member_values, std::span<const std::size_t> subset,
                   double reward, bool done, double gamma);

/// Ensemble of sigmoid-output networks that classify the sign of the advantage
/// of (s, a) pairs.
class AdvantageClassifier {
 public:
  struct Prediction {
    double mean;
    double stddev;
  };

  AdvantageClassifier() = default;
  AdvantageClassifier(int input_width, const std::vector<int>& hidden, const FilterConfig& filter,
                      Rng& rng);

  std::size_t members() const { return nets_.size(); }

  /// One BCE gradient step per member on (inputs, labels in {0, 1}). Returns
  /// the mean loss across members.
  double update(const Matrix& inputs, std::span<const double> labels);
  std::vector<Prediction> predict(const Matrix& inputs) const;
  std::vector<bool> approve(const Matrix& inputs) const;

 private:
  std::vector<numkit::MlpNet> nets_;
  std::vector<numkit::AdamState> opts_;
  double threshold_ = 0.6;
  double max_std_ = 0.2;
};

}  // namespace afbc

#endif  // AFBC_AGENTS_FILTERS_HPP
