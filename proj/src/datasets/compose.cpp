#include <algorithm>
#include <cmath>
#include <sstream>

#include "afbc/datasets.hpp"

namespace afbc {

namespace {

struct RecipeInfo {
  Recipe recipe;
  const char* name;
};

constexpr RecipeInfo kRecipes[] = {
    {Recipe::kGreatExpert, "great-expert"},     {Recipe::kOkayExpert, "okay-expert"},
    {Recipe::kBadExpert, "bad-expert"},         {Recipe::kVeryBadExpert, "verybad-expert"},
    {Recipe::kSignal1, "signal-1"},             {Recipe::kSignal2, "signal-2"},
    {Recipe::kSignal3, "signal-3"},             {Recipe::kSignal4, "signal-4"},
    {Recipe::kStitching, "stitching"},
};

// Noise-to-expert ratio of the Signal recipes at their default budgets.
std::size_t signal_ratio(Recipe r) {
  switch (r) {
    case Recipe::kSignal1: return 8;
    case Recipe::kSignal2: return 16;
    case Recipe::kSignal3: return 32;
    case Recipe::kSignal4: return 64;
    default: return 0;
  }
}

bool is_signal(Recipe r) { return signal_ratio(r) != 0; }

// Splits `n` evenly over tiers [first, kExpert]; leftovers go to the best tiers.
void split_evenly(std::array<std::size_t, kTierCount>& counts, std::size_t n, std::size_t first,
                  std::size_t last) {
  const std::size_t k = last - first + 1;
  for (std::size_t t = first; t <= last; ++t) counts[t] += n / k;
  // rem < k, so t never drops below first.
  for (std::size_t t = last, rem = n % k; rem > 0; --t, --rem) counts[t] += 1;
}

}  // namespace

const char* recipe_name(Recipe recipe) {
  for (const auto& r : kRecipes) {
    if (r.recipe == recipe) return r.name;
  }
  return "?";
}

Recipe parse_recipe(const std::string& name) {
  for (const auto& r : kRecipes) {
    if (name == r.name) return r.recipe;
  }
  std::string known;
  for (const auto& r : kRecipes) known += std::string(known.empty() ? "" : ", ") + r.name;
  throw ConfigError("unknown recipe '" + name + "' (known: " + known + ")");
}

std::vector<Recipe> all_recipes() {
  std::vector<Recipe> out;
  for (const auto& r : kRecipes) out.push_back(r.recipe);
  return out;
}

std::size_t default_budget(Recipe recipe) {
  const ComposeConfig defaults;
  if (is_signal(recipe)) return defaults.expert_budget * (1 + signal_ratio(recipe));
  if (recipe == Recipe::kStitching) return 130'000;
  return 30'000;
}

std::array<std::size_t, kTierCount> recipe_counts(Recipe recipe, std::size_t budget,
                                                  const ComposeConfig& config) {
  std::array<std::size_t, kTierCount> counts{};
  constexpr std::size_t kExpert = static_cast<std::size_t>(Tier::kExpert);
  switch (recipe) {
    case Recipe::kGreatExpert: split_evenly(counts, budget, 3, kExpert); break;
    case Recipe::kOkayExpert: split_evenly(counts, budget, 2, kExpert); break;
    case Recipe::kBadExpert: split_evenly(counts, budget, 1, kExpert); break;
    case Recipe::kVeryBadExpert: split_evenly(counts, budget, 0, kExpert); break;
    case Recipe::kStitching: counts[0] = budget; break;
    default: {
      const std::size_t expert = std::min(config.expert_budget, budget);
      counts[kExpert] = expert;
      split_evenly(counts, budget - expert, 0, kExpert - 1);
      break;
    }
  }
  return counts;
}

StoredDataset compose(Recipe recipe, const TierStore& store, std::size_t budget, Rng& rng,
                      const ComposeConfig& config) {
  const auto want = recipe_counts(recipe, budget, config);
  const Dataset& src = store.data;

  // Candidate pools per tier, in dataset order.
  std::array<std::vector<std::size_t>, kTierCount> pools;
  if (recipe == Recipe::kStitching) {
    for (const auto& block : store.blocks) {
      if (block.tier != Tier::kVeryBad || block.uniform_random) continue;
      for (std::size_t i = block.begin; i < block.end; ++i) pools[0].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src.tier(i) < kTierCount) pools[src.tier(i)].push_back(i);
    }
  }

  std::array<std::size_t, kTierCount> deficits{};
  bool short_any = false;
  for (std::size_t t = 0; t < kTierCount; ++t) {
    if (pools[t].size() < want[t]) {
      deficits[t] = want[t] - pools[t].size();
      short_any = true;
    }
  }
  if (short_any) {
    std::ostringstream msg;
    msg << "cannot compose " << recipe_name(recipe) << " at budget " << budget << ":";
    for (std::size_t t = 0; t < kTierCount; ++t) {
      if (deficits[t] > 0) {
        msg << ' ' << tier_name(static_cast<Tier>(t)) << " short by " << deficits[t] << " (have "
            << pools[t].size() << ", need " << want[t] << ");";
      }
    }
    throw CompositionError(msg.str(), deficits);
  }

  StoredDataset out{Dataset(src.state_dim(), src.action_dim()), {}};
  out.data.reserve(budget);
  for (std::size_t t = 0; t < kTierCount; ++t) {
    auto& pool = pools[t];
    // Partial Fisher-Yates: the first want[t] entries become a uniform
    // sample without replacement.
    for (std::size_t k = 0; k < want[t]; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      out.data.append(src, pool[k]);
    }
  }
  out.manifest.recipe = recipe_name(recipe);
  out.manifest.env_id = store.env.id;
  out.manifest.state_dim = src.state_dim();
  out.manifest.action_dim = src.action_dim();
  out.manifest.total = out.data.size();
  out.manifest.tier_counts = out.data.tier_counts();
  out.manifest.unlabeled_count = out.data.unlabeled_count();
  out.manifest.has_returns_to_go = !out.data.returns_to_go().empty();
  return out;
}

// ------------------------------------------------------------- Mountain Car

namespace {

void take_episodes(Env& env, const ActionFn& policy, Rng& rng, double gamma, std::size_t count,
                   Tier tier, Dataset& out) {
  std::size_t taken = 0;
  while (taken < count) {
    Episode ep = rollout(env, policy, rng, gamma);
    for (std::size_t i = 0; i < ep.transitions.size() && taken < count; ++i, ++taken) {
      out.push_back(ep.transitions.at(i), static_cast<std::uint8_t>(tier),
                    ep.transitions.return_to_go(i));
    }
  }
}

StoredDataset finish(Dataset data, const char* recipe, const std::string& env_id) {
  StoredDataset out{std::move(data), {}};
  out.manifest.recipe = recipe;
  out.manifest.env_id = env_id;
  out.manifest.state_dim = out.data.state_dim();
  out.manifest.action_dim = out.data.action_dim();
  out.manifest.total = out.data.size();
  out.manifest.tier_counts = out.data.tier_counts();
  out.manifest.unlabeled_count = out.data.unlabeled_count();
  out.manifest.has_returns_to_go = true;
  return out;
}

}  // namespace

MountainCarSets build_mountain_car_sets(const ActionFn& expert_policy, Rng& rng,
                                        const MountainCarSetConfig& config,
                                        const MountainCarConfig& env_config) {
  MountainCar1D env(env_config);
  const std::string id = env.spec().id;
  const std::size_t mixed_noise = (config.mixed_size * 9 + 5) / 10;
  const std::size_t mixed_expert = config.mixed_size - mixed_noise;

  Dataset expert(1, 1);
  take_episodes(env, expert_policy, rng, config.gamma, config.expert_size, Tier::kExpert, expert);

  Dataset random_mix(1, 1);
  take_episodes(env, uniform_random_policy(1), rng, config.gamma, mixed_noise, Tier::kVeryBad,
                random_mix);
  take_episodes(env, expert_policy, rng, config.gamma, mixed_expert, Tier::kExpert, random_mix);

  // Mine worst-case transitions from uniform-random rollouts.
  Dataset adversarial(1, 1);
  std::size_t steps = 0;
  const ActionFn random = uniform_random_policy(1);
  while (adversarial.size() < mixed_noise) {
    if (steps >= config.max_mining_steps) {
      throw MiningError("mined " + std::to_string(adversarial.size()) + " of " +
                            std::to_string(mixed_noise) + " worst-case transitions in " +
                            std::to_string(steps) + " random steps",
                        adversarial.size(), steps);
    }
    Vector obs = env.reset(rng);
    std::vector<std::pair<Transition, bool>> episode;
    for (;;) {
      const Vector physical = env.physical_state();
      const Vector action = random(obs, rng);
      const bool label = worst_case_label(env, physical, action);
      StepResult r = env.step(action);
      ++steps;
      episode.push_back({{obs, action, r.reward, r.observation, r.terminal}, label});
      obs = r.observation;
      if (r.done()) break;
    }
    double running = 0.0;
    std::vector<double> rtg(episode.size());
    for (std::size_t i = episode.size(); i-- > 0;) {
      running = episode[i].first.r + config.gamma * running;
      rtg[i] = running;
    }
    for (std::size_t i = 0; i < episode.size() && adversarial.size() < mixed_noise; ++i) {
      if (episode[i].second) {
        adversarial.push_back(episode[i].first, static_cast<std::uint8_t>(Tier::kVeryBad), rtg[i]);
      }
    }
  }
  take_episodes(env, expert_policy, rng, config.gamma, mixed_expert, Tier::kExpert, adversarial);

  return {finish(std::move(expert), "mc-expert", id),
          finish(std::move(random_mix), "mc-random-expert", id),
          finish(std::move(adversarial), "mc-adversarial-expert", id)};
}

}  // namespace afbc
