#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "afbc/agents.hpp"
#include "afbc/errors.hpp"

namespace afbc {

namespace {

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("agent." + field + ": " + rule);
}

}  // namespace

void validate(const AgentConfig& c) {
  require(!c.hidden.empty(), "hidden", "needs at least one hidden layer");
  for (int h : c.hidden) require(h > 0, "hidden", "widths must be positive");
  require(c.actor_lr > 0.0, "actor_lr", "must be > 0");
  require(c.critic_lr > 0.0, "critic_lr", "must be > 0");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma", "must lie in [0, 1]");
  require(c.tau_polyak > 0.0 && c.tau_polyak <= 1.0, "tau_polyak", "must lie in (0, 1]");
  require(c.target_delay >= 1, "target_delay", "must be >= 1");
  require(c.advantage_samples >= 1, "advantage_samples", "must be >= 1");
  require(c.subset_size >= 2, "subset_size", "must be >= 2");
  require(c.subset_size <= c.ensemble_size, "subset_size", "must not exceed ensemble_size");
  require(c.tau_temp >= 0.0, "tau_temp", "must be >= 0");
  require(c.target_bound > 0.0, "target_bound", "must be > 0");
  const FilterConfig& f = c.filter;
  if (f.kind == FilterKind::kExponential) {
    require(f.beta > 0.0, "filter.beta", "must be > 0");
    require(f.clip_max > 0.0, "filter.clip_max", "must be > 0");
  }
  if (f.kind == FilterKind::kTTestAnnealed) {
    require(f.ttest_k >= 2, "filter.ttest_k", "must be >= 2");
    require(f.ttest_p_end > 0.0 && f.ttest_p_end <= f.ttest_p_start && f.ttest_p_start <= 1.0,
            "filter.ttest_p", "schedule must satisfy 0 < p_end <= p_start <= 1");
    require(f.ttest_anneal_fraction >= 0.0 && f.ttest_anneal_fraction <= 1.0,
            "filter.ttest_anneal_fraction", "must lie in [0, 1]");
  }
  if (f.kind == FilterKind::kClassifier) {
    require(f.classifier_members >= 1, "filter.classifier_members", "must be >= 1");
    require(f.classifier_threshold > 0.0 && f.classifier_threshold < 1.0,
            "filter.classifier_threshold", "must lie in (0, 1)");
    require(f.classifier_max_std > 0.0, "filter.classifier_max_std", "must be > 0");
    require(f.classifier_lr > 0.0, "filter.classifier_lr", "must be > 0");
  }
}

AfbcAgent::AfbcAgent(int state_dim, int action_dim, AgentConfig config, Rng& init_rng)
    : config_(std::move(config)), state_dim_(state_dim), action_dim_(action_dim) {
  validate(config_);
  if (state_dim < 1 || action_dim < 1) throw ConfigError("agent needs positive state/action dims");
  actor_ = SquashedGaussianPolicy::create(state_dim, action_dim, config_.hidden, init_rng,
                                          config_.policy);
  actor_opt_ = numkit::AdamState(actor_.trunk(), numkit::AdamConfig{config_.actor_lr});

  const auto q_sizes = with_ends(state_dim + action_dim, config_.hidden, 1);
  for (int i = 0; i < config_.ensemble_size; ++i) {
    critics_.push_back(numkit::MlpNet::uniform_init(q_sizes, init_rng));
    critic_opts_.emplace_back(critics_.back(), numkit::AdamConfig{config_.critic_lr});
  }
  targets_ = critics_;
  if (config_.popart) popart_.emplace(config_.popart_config);

  value_ = numkit::MlpNet::uniform_init(with_ends(state_dim, config_.hidden, 1), init_rng);
  value_opt_ = numkit::AdamState(value_, numkit::AdamConfig{config_.critic_lr});

  if (config_.filter.kind == FilterKind::kClassifier) {
    classifier_ = AdvantageClassifier(state_dim + action_dim, config_.hidden, config_.filter,
                                      init_rng);
  }
}

Matrix AfbcAgent::critic_input(const Matrix& states, const Matrix& actions) {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

namespace {

Matrix ensemble_values(const std::vector<numkit::MlpNet>& nets, const Matrix& input,
                       const std::optional<numkit::PopArtStats>& popart) {
  Matrix out(static_cast<Eigen::Index>(nets.size()), input.cols());
  for (std::size_t i = 0; i < nets.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = nets[i].forward(input);
  }
  if (popart) out = (out.array() * popart->sigma() + popart->mu()).matrix();
  return out;
}

}  // namespace

Matrix AfbcAgent::critic_values(const Matrix& states, const Matrix& actions) const {
  return ensemble_values(critics_, critic_input(states, actions), popart_);
}

Matrix AfbcAgent::target_values(const Matrix& states, const Matrix& actions) const {
  return ensemble_values(targets_, critic_input(states, actions), popart_);
}

Vector AfbcAgent::bellman_targets(const Batch& batch, Rng& rng, Matrix* member_values) const {
  const Matrix next_actions = actor_.sample_actions(batch.next_states, rng);
  Matrix members = target_values(batch.next_states, next_actions);

  const auto n = static_cast<std::size_t>(config_.ensemble_size);
  const auto m = static_cast<std::size_t>(config_.subset_size);
  std::vector<std::size_t> subset(n);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  if (m < n) {
    for (std::size_t k = 0; k < m; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(subset[k], subset[pick(rng)]);
    }
  }
  subset.resize(m);

  Vector y(batch.next_states.cols());
  std::vector<double> column(n);
  for (Eigen::Index b = 0; b < y.size(); ++b) {
    for (std::size_t j = 0; j < n; ++j) column[j] = members(static_cast<Eigen::Index>(j), b);
    y(b) = redq_target(column, subset, batch.rewards(b), batch.dones(b) > 0.5, config_.gamma);
  }
  if (member_values) *member_values = std::move(members);
  return y;
}

double AfbcAgent::critic_update(const Batch& batch, Rng& rng) {
  Matrix members;
  Vector y = bellman_targets(batch, rng, &members);
  const Eigen::Index batch_size = y.size();
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    if (std::isnan(y(b))) {
      throw NumericError("critic target is NaN at batch slot " + std::to_string(b));
    }
    if (std::abs(y(b)) > config_.target_bound) ++exploding_;
  }

  // Softmax weights sum to one; scaling by B keeps the unweighted case equal
  // to the plain mean loss.
  std::vector<double> weights(static_cast<std::size_t>(batch_size), 1.0);
  if (config_.uncertainty_weighting) {
    weights = uncertainty_weights(members, config_.tau_temp);
    for (auto& w : weights) w *= static_cast<double>(batch_size);
  }

  if (popart_) {
    std::vector<numkit::MlpNet*> heads;
    for (auto& c : critics_) heads.push_back(&c);
    for (auto& t : targets_) heads.push_back(&t);
    numkit::popart_update(*popart_, heads, std::span<const double>(y.data(), y.size()));
    for (Eigen::Index b = 0; b < batch_size; ++b) y(b) = popart_->normalize(y(b));
  }

  const Matrix input = critic_input(batch.states, batch.actions);
  Matrix predictions(static_cast<Eigen::Index>(critics_.size()), batch_size);
  numkit::ForwardCache cache;
  numkit::GradTape tape;
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    const Matrix& q = critics_[i].forward(input, cache);
    predictions.row(static_cast<Eigen::Index>(i)) = q;
    Matrix grad(1, batch_size);
    for (Eigen::Index b = 0; b < batch_size; ++b) {
      grad(0, b) = weights[static_cast<std::size_t>(b)] * (q(0, b) - y(b)) * inv_batch;
    }
    numkit::backward(critics_[i], cache, grad, tape);
    numkit::adam_step(critics_[i], tape, critic_opts_[i]);
  }
  const double loss = weighted_critic_loss(predictions, y, weights);
  if (!std::isfinite(loss)) throw NumericError("critic loss is not finite");

  ++critic_steps_;
  if (critic_steps_ % static_cast<std::uint64_t>(config_.target_delay) == 0) {
    for (std::size_t i = 0; i < critics_.size(); ++i) {
      numkit::polyak_update(targets_[i], critics_[i], config_.tau_polyak);
    }
  }
  return loss;
}

std::vector<double> AfbcAgent::q_advantages(const Matrix& states, const Matrix& actions,
                                            Rng& rng) const {
  const Eigen::Index batch = states.cols();
  const int k = config_.advantage_samples;
  Matrix all_states(states.rows(), batch * (k + 1));
  for (int r = 0; r <= k; ++r) all_states.middleCols(r * batch, batch) = states;
  Matrix all_actions(actions.rows(), batch * (k + 1));
  all_actions.leftCols(batch) = actions;
  all_actions.rightCols(batch * k) = actor_.sample_actions(all_states.rightCols(batch * k), rng);

  const Matrix values = critic_values(all_states, all_actions);
  const Eigen::RowVectorXd q = values.colwise().mean();
  std::vector<double> adv(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    double baseline = 0.0;
    for (int r = 1; r <= k; ++r) baseline += q(r * batch + b);
    adv[static_cast<std::size_t>(b)] = q(b) - baseline / k;
  }
  return adv;
}

double AfbcAgent::value_update(const Batch& batch) {
  if (batch.returns_to_go.size() != static_cast<Eigen::Index>(batch.size()) ||
      !batch.returns_to_go.allFinite()) {
    throw DataError("Monte-Carlo value regression needs return-to-go annotations");
  }
  numkit::ForwardCache cache;
  numkit::GradTape tape;
  const Matrix& v = value_.forward(batch.states, cache);
  const Eigen::RowVectorXd err = v.row(0) - batch.returns_to_go.transpose();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double loss = 0.5 * err.squaredNorm() * inv_batch;
  if (!std::isfinite(loss)) throw NumericError("value loss is not finite");
  numkit::backward(value_, cache, err * inv_batch, tape);
  numkit::adam_step(value_, tape, value_opt_);
  return loss;
}

std::vector<double> AfbcAgent::mc_advantages(const Batch& batch) const {
  if (batch.returns_to_go.size() != static_cast<Eigen::Index>(batch.size())) {
    throw DataError("Monte-Carlo advantages need return-to-go annotations");
  }
  const Matrix v = value_.forward(batch.states);
  std::vector<double> adv(batch.size());
  for (std::size_t b = 0; b < adv.size(); ++b) {
    const double g = batch.returns_to_go(static_cast<Eigen::Index>(b));
    if (std::isnan(g)) throw DataError("transition without a return-to-go annotation");
    adv[b] = g - v(0, static_cast<Eigen::Index>(b));
  }
  return adv;
}

double mc_advantage(const numkit::MlpNet& value_net, double return_to_go, const Vector& state) {
  if (std::isnan(return_to_go)) throw DataError("transition without a return-to-go annotation");
  return return_to_go - value_net.forward(state)(0);
}

std::vector<double> AfbcAgent::advantages(const Batch& batch, Rng& rng) const {
  if (config_.estimator == AdvantageEstimator::kMonteCarlo) return mc_advantages(batch);
  return q_advantages(batch.states, batch.actions, rng);
}

std::vector<bool> AfbcAgent::ttest_filter(const Matrix& states, const Matrix& actions, int k,
                                          double p_threshold, Rng& rng) const {
  const auto batch = static_cast<std::size_t>(states.cols());
  if (p_threshold >= 1.0) return std::vector<bool>(batch, true);
  if (k < 2) throw ConfigError("t-test filter needs k >= 2");
  std::vector<std::vector<double>> data(batch), pol(batch);
  for (int r = 0; r < k; ++r) {
    const Matrix policy_actions = actor_.sample_actions(states, rng);
    const auto ds = q_advantages(states, actions, rng);
    const auto ps = q_advantages(states, policy_actions, rng);
    for (std::size_t b = 0; b < batch; ++b) {
      data[b].push_back(ds[b]);
      pol[b].push_back(ps[b]);
    }
  }
  std::vector<bool> out(batch);
  for (std::size_t b = 0; b < batch; ++b) out[b] = ttest_approves(data[b], pol[b], p_threshold);
  return out;
}

std::vector<double> AfbcAgent::filter_weights(const Batch& batch,
                                              std::span<const double> advantages, Rng& rng,
                                              std::uint64_t step, std::uint64_t total_steps) {
  const FilterConfig& f = config_.filter;
  switch (f.kind) {
    case FilterKind::kBinary:
    case FilterKind::kExponential:
      return apply_filter(f, advantages, popart_ ? popart_->sigma() : 1.0);
    case FilterKind::kTTestAnnealed: {
      const double p = ttest_threshold(f, step, total_steps);
      const auto ok = ttest_filter(batch.states, batch.actions, f.ttest_k, p, rng);
      return std::vector<double>(ok.begin(), ok.end());
    }
    case FilterKind::kClassifier: {
      const Matrix input = critic_input(batch.states, batch.actions);
      std::vector<double> labels(advantages.size());
      std::transform(advantages.begin(), advantages.end(), labels.begin(),
                     [](double a) { return a > 0.0 ? 1.0 : 0.0; });
      classifier_.update(input, labels);
      const auto ok = classifier_.approve(input);
      return std::vector<double>(ok.begin(), ok.end());
    }
  }
  return {};
}

double AfbcAgent::actor_update(const Batch& batch, std::span<const double> weights) {
  numkit::GradTape tape;
  const double loss = actor_.weighted_nll_backward(batch.states, batch.actions, weights, tape);
  if (!std::isfinite(loss)) throw NumericError("actor loss is not finite");
  numkit::adam_step(actor_.trunk(), tape, actor_opt_);
  return loss;
}

double AfbcAgent::bc_update(const Batch& batch) {
  const std::vector<double> ones(batch.size(), 1.0);
  return actor_update(batch, ones);
}

}  // namespace afbc
