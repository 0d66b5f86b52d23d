#include <algorithm>
#include <cmath>
#include <memory>

#include "afbc/datasets.hpp"

namespace afbc {

Episode rollout(Env& env, const ActionFn& policy, Rng& rng, double gamma) {
  const auto& spec = env.spec();
  Episode ep{Dataset(spec.state_dim, spec.action_dim), 0.0, false};
  std::vector<Transition> steps;
  steps.reserve(static_cast<std::size_t>(spec.max_episode_steps));
  Vector obs = env.reset(rng);
  for (;;) {
    Vector action = policy(obs, rng);
    if (!action.allFinite()) throw NumericError("collection policy produced a non-finite action");
    action = action.cwiseMax(-1.0).cwiseMin(1.0);
    StepResult r = env.step(action);
    steps.push_back({obs, action, r.reward, r.observation, r.terminal});
    ep.undiscounted_return += r.reward;
    obs = r.observation;
    if (r.done()) {
      ep.reached_terminal = r.terminal;
      break;
    }
  }
  std::vector<double> rtg(steps.size());
  double running = 0.0;
  for (std::size_t i = steps.size(); i-- > 0;) {
    running = steps[i].r + gamma * running;
    rtg[i] = running;
  }
  ep.transitions.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    ep.transitions.push_back(steps[i], kUnlabeledTier, rtg[i]);
  }
  return ep;
}

namespace {

Vector expert_action(const Env& env, const Vector& obs) {
  if (const auto* p = dynamic_cast<const PendulumSwingUp*>(&env)) {
    return pendulum_expert_action(obs, p->config());
  }
  if (dynamic_cast<const MountainCar1D*>(&env) != nullptr) return mountain_car_expert_action(obs);
  throw ConfigError("no scripted expert for environment " + env.spec().id);
}

// Opposes the current motion: the "do nothing useful" controller.
Vector damping_action(const Env& env, const Vector& obs) {
  Vector a(env.spec().action_dim);
  if (env.spec().id == "pendulum_swingup") {
    a(0) = std::clamp(-obs(2), -1.0, 1.0);
  } else {
    a(0) = obs(0) >= 0.0 ? -0.5 : 0.5;
  }
  return a;
}

}  // namespace

ActionFn graded_policy(const Env& env, const GradedPolicySpec& spec) {
  std::shared_ptr<const Env> owner = env.clone();
  return [owner, spec](const Vector& obs, Rng& rng) -> Vector {
    const int dim = owner->spec().action_dim;
    // One draw per step decides who acts, keeping consumption fixed per step.
    const bool expert_turn = uniform01(rng) < spec.quality;
    if (expert_turn) {
      Vector a = expert_action(*owner, obs);
      for (int d = 0; d < dim; ++d) a(d) += spec.expert_noise * standard_normal(rng);
      return a.cwiseMax(-1.0).cwiseMin(1.0);
    }
    switch (spec.bad) {
      case BadBehaviour::kDamping:
        return damping_action(*owner, obs);
      case BadBehaviour::kReversedExpert:
        return -expert_action(*owner, obs);
      case BadBehaviour::kUniformRandom:
        break;
    }
    Vector a(dim);
    for (int d = 0; d < dim; ++d) a(d) = 2.0 * uniform01(rng) - 1.0;
    return a;
  };
}

ActionFn mountain_car_expert_policy(double noise) {
  return [noise](const Vector& obs, Rng& rng) -> Vector {
    Vector a(1);
    const double direction = obs(0) >= 0.0 ? 1.0 : -1.0;
    a(0) = std::tanh(2.5 * direction + noise * standard_normal(rng));
    return a;
  };
}

ActionFn uniform_random_policy(int action_dim) {
  return [action_dim](const Vector&, Rng& rng) -> Vector {
    Vector a(action_dim);
    for (int d = 0; d < action_dim; ++d) a(d) = 2.0 * uniform01(rng) - 1.0;
    return a;
  };
}

TierStore collect_snapshots(const Env& env, const CollectConfig& config, Rng& rng,
                            std::size_t* discarded) {
  if (config.episodes_per_block <= 0) throw ConfigError("episodes_per_block must be positive");
  const auto& spec = env.spec();
  TierStore store{spec, Dataset(spec.state_dim, spec.action_dim), {}};
  std::size_t dropped = 0;
  auto worker = env.clone();

  auto tiers_satisfied = [&] {
    const auto counts = store.data.tier_counts();
    return std::all_of(counts.begin(), counts.end(),
                       [&](std::size_t c) { return c >= config.min_per_tier; });
  };

  for (int b = 0; b < config.max_blocks; ++b) {
    if (b >= config.blocks && tiers_satisfied()) break;
    // Block 0 is pure uniform random; later blocks sweep quality and cycle
    // through the bad behaviours.
    GradedPolicySpec policy_spec;
    if (b > 0) {
      policy_spec.quality = uniform01(rng);
      policy_spec.bad = static_cast<BadBehaviour>(b % 3);
    }
    const bool uniform = policy_spec.quality == 0.0 &&
                         policy_spec.bad == BadBehaviour::kUniformRandom;
    const ActionFn policy = graded_policy(env, policy_spec);

    Dataset block(spec.state_dim, spec.action_dim);
    double total_return = 0.0;
    bool ok = true;
    for (int e = 0; e < config.episodes_per_block && ok; ++e) {
      try {
        Episode ep = rollout(*worker, policy, rng, config.gamma);
        total_return += ep.undiscounted_return;
        for (std::size_t i = 0; i < ep.transitions.size(); ++i) block.append(ep.transitions, i);
      } catch (const NumericError&) {
        ok = false;
      }
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    BlockInfo info;
    info.average_return = total_return / config.episodes_per_block;
    info.tier = tier_for_return(info.average_return, spec.return_low, spec.return_high);
    info.uniform_random = uniform;
    info.begin = store.data.size();
    for (std::size_t i = 0; i < block.size(); ++i) {
      store.data.push_back(block.at(i), static_cast<std::uint8_t>(info.tier),
                           block.return_to_go(i));
    }
    info.end = store.data.size();
    store.blocks.push_back(info);
  }
  if (discarded != nullptr) *discarded = dropped;
  return store;
}

void rebin(TierStore& store) {
  Dataset rebuilt(store.data.state_dim(), store.data.action_dim());
  rebuilt.reserve(store.data.size());
  for (auto& block : store.blocks) {
    block.tier = tier_for_return(block.average_return, store.env.return_low, store.env.return_high);
  }
  std::vector<std::uint8_t> tier_of(store.data.size(), kUnlabeledTier);
  for (const auto& block : store.blocks) {
    for (std::size_t i = block.begin; i < block.end; ++i) {
      tier_of[i] = static_cast<std::uint8_t>(block.tier);
    }
  }
  for (std::size_t i = 0; i < store.data.size(); ++i) {
    rebuilt.push_back(store.data.at(i), tier_of[i],
                      store.data.has_returns_to_go() ? store.data.return_to_go(i)
                                                     : std::numeric_limits<double>::quiet_NaN());
  }
  store.data = std::move(rebuilt);
}

}  // namespace afbc
