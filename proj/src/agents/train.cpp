#include <algorithm>
#include <numeric>
#include <string>

#include "afbc/agents.hpp"
#include "afbc/errors.hpp"
#include "json.hpp"

namespace afbc {

using nlohmann::json;

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBc: return "bc";
    case TrainMode::kAfbcUniform: return "afbc_uniform";
    case TrainMode::kAfbcPer: return "afbc_per";
  }
  return "?";
}

TrainMode parse_mode(const std::string& name) {
  for (TrainMode m : {TrainMode::kBc, TrainMode::kAfbcUniform, TrainMode::kAfbcPer}) {
    if (name == mode_name(m)) return m;
  }
  throw ConfigError("unknown mode '" + name + "' (known: bc, afbc_uniform, afbc_per)");
}

double EvalResult::mean_return() const {
  if (returns.empty()) return 0.0;
  return std::accumulate(returns.begin(), returns.end(), 0.0) /
         static_cast<double>(returns.size());
}

double EvalResult::goal_rate() const {
  if (reached_goal.empty()) return 0.0;
  return static_cast<double>(std::count(reached_goal.begin(), reached_goal.end(), true)) /
         static_cast<double>(reached_goal.size());
}

EvalResult evaluate_policy(const SquashedGaussianPolicy& policy, Env& env, int episodes,
                           Rng& rng) {
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(rng);
    double total = 0.0;
    bool goal = false;
    for (;;) {
      const StepResult r = env.step(policy.mean_action(obs));
      total += r.reward;
      obs = r.observation;
      if (r.done()) {
        goal = r.terminal;
        break;
      }
    }
    out.returns.push_back(total);
    out.reached_goal.push_back(goal);
  }
  return out;
}

namespace {

double positive_fraction(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const auto n = std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

void check(const TrainConfig& c) {
  if (c.steps == 0) throw ConfigError("train.steps: must be > 0");
  if (c.batch_size == 0) throw ConfigError("train.batch_size: must be > 0");
  if (c.eval_interval == 0) throw ConfigError("train.eval_interval: must be > 0");
  if (c.eval_episodes < 1) throw ConfigError("train.eval_episodes: must be >= 1");
}

}  // namespace

TrainSummary train(AfbcAgent& agent, ReplayBuffer& buffer, Env& eval_env,
                   const TrainConfig& config, std::uint64_t seed, std::ostream* log) {
  check(config);
  if (buffer.data().state_dim() != agent.state_dim() ||
      buffer.data().action_dim() != agent.action_dim()) {
    throw ConfigError("dataset dimensions do not match the agent");
  }
  const bool afbc = config.mode != TrainMode::kBc;
  const bool per = config.mode == TrainMode::kAfbcPer;
  const bool mc = agent.config().estimator == AdvantageEstimator::kMonteCarlo;
  const bool exponential = agent.config().filter.kind == FilterKind::kExponential;

  Rng critic_batch_rng = make_stream(seed, "critic_batch");
  Rng critic_noise_rng = make_stream(seed, "critic_noise");
  Rng actor_batch_rng = make_stream(seed, "actor_batch");
  Rng filter_rng = make_stream(seed, "advantage_filter");
  Rng priority_rng = make_stream(seed, "advantage_priority");
  Rng probe_rng = make_stream(seed, "probe");

  Batch probe;
  if (afbc && config.probe_size > 0) probe = buffer.sample_uniform(config.probe_size, probe_rng);

  if (log) {
    *log << json{{"type", "config"},
                 {"mode", mode_name(config.mode)},
                 {"seed", seed},
                 {"steps", config.steps},
                 {"batch_size", config.batch_size},
                 {"eval_interval", config.eval_interval},
                 {"eval_episodes", config.eval_episodes},
                 {"dataset_size", buffer.size()}}
                .dump()
         << '\n';
  }

  TrainSummary summary;
  summary.approval_per_step.reserve(config.steps);
  double critic_acc = 0.0;
  double actor_acc = 0.0;
  double approval_acc = 0.0;
  std::uint64_t since_eval = 0;

  for (std::uint64_t step = 1; step <= config.steps; ++step) {
    double approval = 1.0;
    try {
      if (afbc) {
        const Batch cb = buffer.sample_uniform(config.batch_size, critic_batch_rng);
        critic_acc += mc ? agent.value_update(cb) : agent.critic_update(cb, critic_noise_rng);
        if (per) {
          const auto adv = agent.advantages(cb, priority_rng);
          buffer.update_priorities(cb.indices, adv);
        }

        const Batch ab = per ? buffer.sample_prioritized(config.batch_size, actor_batch_rng)
                             : buffer.sample_uniform(config.batch_size, actor_batch_rng);
        const auto adv = agent.advantages(ab, filter_rng);
        const auto weights = agent.filter_weights(ab, adv, filter_rng, step - 1, config.steps);
        approval = exponential ? positive_fraction(adv) : positive_fraction(weights);
        actor_acc += agent.actor_update(ab, weights);
        if (per) {
          const auto refreshed = agent.advantages(ab, priority_rng);
          buffer.update_priorities(ab.indices, refreshed);
        }
      } else {
        const Batch ab = buffer.sample_uniform(config.batch_size, actor_batch_rng);
        actor_acc += agent.bc_update(ab);
      }
    } catch (const NumericError& e) {
      throw NumericError("training step " + std::to_string(step) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("training step " + std::to_string(step) + ": " + e.what());
    }
    summary.approval_per_step.push_back(approval);
    approval_acc += approval;
    ++since_eval;

    if (step % config.eval_interval == 0) {
      const std::uint64_t index = step / config.eval_interval;
      Rng eval_rng = make_stream(seed, "eval", index);
      const EvalResult r = evaluate_policy(agent.actor(), eval_env, config.eval_episodes, eval_rng);
      const double n = static_cast<double>(since_eval);
      EvalPoint point{step,           r.mean_return(),  r.goal_rate(),
                      approval_acc / n, critic_acc / n, actor_acc / n};
      summary.evals.push_back(point);
      if (log) {
        *log << json{{"type", "eval"},
                     {"step", step},
                     {"return", point.mean_return},
                     {"goal_rate", point.goal_rate},
                     {"approval", point.approval},
                     {"critic_loss", point.critic_loss},
                     {"actor_loss", point.actor_loss},
                     {"episode_returns", r.returns}}
                    .dump()
             << '\n';
        if (probe.size() > 0) {
          Rng probe_adv_rng = make_stream(seed, "probe_advantage", index);
          *log << json{{"type", "probe"},
                       {"step", step},
                       {"advantages", agent.advantages(probe, probe_adv_rng)}}
                      .dump()
               << '\n';
        }
      }
      critic_acc = actor_acc = approval_acc = 0.0;
      since_eval = 0;
    }
  }

  const auto& a = summary.approval_per_step;
  summary.mean_approval = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  summary.exploding_targets = agent.exploding_targets();
  summary.skipped_priority_updates = buffer.skipped_updates();
  summary.uniform_fallbacks = buffer.uniform_fallbacks();
  if (log) {
    *log << json{{"type", "summary"},
                 {"mean_approval", summary.mean_approval},
                 {"exploding_targets", summary.exploding_targets},
                 {"skipped_priority_updates", summary.skipped_priority_updates},
                 {"uniform_fallbacks", summary.uniform_fallbacks}}
                .dump()
         << '\n';
  }
  return summary;
}

}  // namespace afbc
