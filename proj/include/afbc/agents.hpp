#ifndef AFBC_AGENTS_HPP
#define AFBC_AGENTS_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "afbc/agents/filters.hpp"
#include "afbc/datasets.hpp"
#include "afbc/envlab.hpp"
#include "afbc/numkit/adam.hpp"
#include "afbc/numkit/mlp.hpp"
#include "afbc/numkit/popart.hpp"
#include "afbc/policy.hpp"
#include "afbc/replay.hpp"
#include "afbc/rng.hpp"

namespace afbc {

enum class AdvantageEstimator { kQ, kMonteCarlo };

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double gamma = 0.99;
  double tau_polyak = 0.005;
  int target_delay = 2;
  int advantage_samples = 4;

  // Critic ensemble: n members, targets take the min over a random m-subset.
  int ensemble_size = 2;
  int subset_size = 2;
  bool uncertainty_weighting = false;
  double tau_temp = 1.0;

  bool popart = false;
  numkit::PopArtConfig popart_config;

  double target_bound = 1e6;  // |y| above this counts as an exploding target
  AdvantageEstimator estimator = AdvantageEstimator::kQ;
  FilterConfig filter;
  PolicyConfig policy;

  bool operator==(const AgentConfig&) const = default;
};

/// Validates ranges; throws ConfigError naming the offending field.
void validate(const AgentConfig& config);

/// Actor, critic ensemble with polyak targets, optional PopArt statistics,
/// optional Monte-Carlo value baseline and optional advantage classifier.
class AfbcAgent {
 public:
  AfbcAgent(int state_dim, int action_dim, AgentConfig config, Rng& init_rng);

  const AgentConfig& config() const { return config_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  SquashedGaussianPolicy& actor() { return actor_; }
  const SquashedGaussianPolicy& actor() const { return actor_; }
  std::vector<numkit::MlpNet>& critics() { return critics_; }
  const std::vector<numkit::MlpNet>& critics() const { return critics_; }
  std::vector<numkit::MlpNet>& target_critics() { return targets_; }
  const std::vector<numkit::MlpNet>& target_critics() const { return targets_; }
  numkit::MlpNet& value_net() { return value_; }
  const std::optional<numkit::PopArtStats>& popart() const { return popart_; }
  const AdvantageClassifier& classifier() const { return classifier_; }

  std::uint64_t critic_steps() const { return critic_steps_; }
  std::uint64_t exploding_targets() const { return exploding_; }

  /// Concatenates states over actions: (state_dim + action_dim) x B.
  static Matrix critic_input(const Matrix& states, const Matrix& actions);

  /// De-normalized predictions of every online critic, n x B.
  Matrix critic_values(const Matrix& states, const Matrix& actions) const;
  /// Same for the target critics.
  Matrix target_values(const Matrix& states, const Matrix& actions) const;

  /// Bellman targets r + gamma (1 - done) min_{j in subset} Q'_j(s', a'),
  /// a' ~ pi(s'). The subset is drawn from `rng` only when m < n. If
  /// `member_values` is given it receives the n x B target-ensemble matrix.
  Vector bellman_targets(const Batch& batch, Rng& rng, Matrix* member_values = nullptr) const;

  /// One step of every critic toward the Bellman targets; polyak-updates the
  /// targets every target_delay calls. Returns the (optionally uncertainty
  /// weighted) half squared error averaged over the batch.
  double critic_update(const Batch& batch, Rng& rng);

  /// Q-based advantage: mean critic value at (s, a) minus the mean over
  /// advantage_samples policy actions, in reward units.
  std::vector<double> q_advantages(const Matrix& states, const Matrix& actions, Rng& rng) const;

  /// Regresses the state-value baseline on returns-to-go. Throws DataError if
  /// the batch has none.
  double value_update(const Batch& batch);
  /// return-to-go minus V(s).
  std::vector<double> mc_advantages(const Batch& batch) const;

  /// Advantages with the configured estimator.
  std::vector<double> advantages(const Batch& batch, Rng& rng) const;

  /// Filter weights for an actor batch. `advantages` are this batch's
  /// estimates; the t-test filter draws its own repeated estimates from `rng`
  /// and the classifier filter is trained on their signs before it is applied.
  std::vector<double> filter_weights(const Batch& batch, std::span<const double> advantages,
                                     Rng& rng, std::uint64_t step, std::uint64_t total_steps);

  /// Paired t-test decision for every sample of the batch.
  std::vector<bool> ttest_filter(const Matrix& states, const Matrix& actions, int k,
                                 double p_threshold, Rng& rng) const;

  /// Weighted negative log-likelihood step; returns the loss before the step.
  double actor_update(const Batch& batch, std::span<const double> weights);
  /// Plain behavioural cloning: actor_update with unit weights.
  double bc_update(const Batch& batch);

 private:
  AgentConfig config_;
  int state_dim_;
  int action_dim_;

  SquashedGaussianPolicy actor_;
  numkit::AdamState actor_opt_;
  std::vector<numkit::MlpNet> critics_;
  std::vector<numkit::MlpNet> targets_;
  std::vector<numkit::AdamState> critic_opts_;
  std::optional<numkit::PopArtStats> popart_;
  numkit::MlpNet value_;
  numkit::AdamState value_opt_;
  AdvantageClassifier classifier_;

  std::uint64_t critic_steps_ = 0;
  std::uint64_t exploding_ = 0;
};

/// Â_MC = return_to_go - V(s).
double mc_advantage(const numkit::MlpNet& value_net, double return_to_go, const Vector& state);

// ------------------------------------------------------------------ training

enum class TrainMode { kBc, kAfbcUniform, kAfbcPer };

const char* mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);  // throws ConfigError

struct TrainConfig {
  TrainMode mode = TrainMode::kAfbcPer;
  std::uint64_t steps = 50'000;
  std::size_t batch_size = 512;
  std::uint64_t eval_interval = 1000;
  int eval_episodes = 10;
  std::size_t probe_size = 1000;  // fixed sample for advantage snapshots; 0 disables

  bool operator==(const TrainConfig&) const = default;
};

struct EvalResult {
  std::vector<double> returns;
  std::vector<bool> reached_goal;  // episode ended in a true terminal
  double mean_return() const;
  double goal_rate() const;
};

/// Mean-action rollouts.
EvalResult evaluate_policy(const SquashedGaussianPolicy& policy, Env& env, int episodes, Rng& rng);

struct EvalPoint {
  std::uint64_t step = 0;
  double mean_return = 0.0;
  double goal_rate = 0.0;
  double approval = 0.0;     // mean actor-batch approval fraction since the last eval
  double critic_loss = 0.0;  // means since the last eval
  double actor_loss = 0.0;
};

struct TrainSummary {
  std::vector<EvalPoint> evals;
  std::vector<double> approval_per_step;
  double mean_approval = 0.0;
  std::uint64_t exploding_targets = 0;
  std::uint64_t skipped_priority_updates = 0;
  std::uint64_t uniform_fallbacks = 0;
};

/// Offline training. Every step: a uniform critic batch updates the critics
/// and (PER only) the priorities of that batch; an actor batch (prioritized
/// for afbc_per) is filtered and cloned, after which PER recomputes its
/// priorities. Random streams are derived from `seed` per consumer, so
/// afbc_per with alpha = 0 draws exactly the batches afbc_uniform draws.
///
/// If `log` is non-null one JSON object per line is written: a "config"
/// record, then "eval" and "probe" records every eval_interval steps and a
/// final "summary".
TrainSummary train(AfbcAgent& agent, ReplayBuffer& buffer, Env& eval_env,
                   const TrainConfig& config, std::uint64_t seed, std::ostream* log = nullptr);

}  // namespace afbc

#endif  // AFBC_AGENTS_HPP
