#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "afbc/cli.hpp"
#include "afbc/errors.hpp"
#include "afbc/evalkit.hpp"
#include "afbc/numkit/checkpoint.hpp"

namespace fs = std::filesystem;

namespace afbc {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

TierStore load_tier_store(const fs::path& path) {
  StoredDataset stored = load_dataset(path);
  TierStore store;
  store.env = make_env(stored.manifest.env_id)->spec();
  store.data = std::move(stored.data);
  store.blocks = std::move(stored.manifest.blocks);
  return store;
}

StoredDataset build_mc_recipe(const std::string& recipe, std::size_t budget, Rng& rng) {
  MountainCarSetConfig cfg;
  // Only the requested set is built at full size.
  if (recipe == "mc-expert") {
    cfg.expert_size = budget ? budget : cfg.expert_size;
    cfg.mixed_size = 10;
  } else {
    cfg.expert_size = 1;
    cfg.mixed_size = budget ? budget : cfg.mixed_size;
  }
  MountainCarSets sets = build_mountain_car_sets(mountain_car_expert_policy(), rng, cfg);
  if (recipe == "mc-expert") return std::move(sets.expert);
  if (recipe == "mc-random-expert") return std::move(sets.random_mix);
  if (recipe == "mc-adversarial-expert") return std::move(sets.adversarial_mix);
  throw ConfigError("unknown Mountain-Car recipe '" + recipe + "'");
}

std::map<std::string, std::string> checkpoint_metadata(const RunConfig& c, int state_dim,
                                                       int action_dim) {
  return {{"env", c.env},
          {"state_dim", std::to_string(state_dim)},
          {"action_dim", std::to_string(action_dim)},
          {"mode", mode_name(c.train.mode)},
          {"seed", std::to_string(c.seed)},
          {"steps", std::to_string(c.train.steps)},
          {"log_std_min", std::to_string(c.agent.policy.log_std_min)},
          {"log_std_max", std::to_string(c.agent.policy.log_std_max)}};
}

}  // namespace

StoredDataset prepare_dataset(const RunConfig& c) {
  if (!c.dataset.path.empty()) {
    StoredDataset stored = load_dataset(c.dataset.path);
    if (!stored.manifest.env_id.empty() && stored.manifest.env_id != c.env) {
      throw ConfigError("dataset " + c.dataset.path + " was recorded on '" +
                        stored.manifest.env_id + "' but env is '" + c.env + "'");
    }
    return stored;
  }
  Rng rng = make_stream(c.dataset.seed, "dataset");
  StoredDataset out;
  if (c.dataset.recipe.rfind("mc-", 0) == 0) {
    out = build_mc_recipe(c.dataset.recipe, c.dataset.budget, rng);
  } else {
    const Recipe recipe = parse_recipe(c.dataset.recipe);
    const TierStore store = load_tier_store(c.dataset.tiers);
    if (store.env.id != c.env) {
      throw ConfigError("tier store " + c.dataset.tiers + " belongs to '" + store.env.id + "'");
    }
    const std::size_t budget = c.dataset.budget ? c.dataset.budget : default_budget(recipe);
    out = compose(recipe, store, budget, rng);
  }
  out.manifest.seed = c.dataset.seed;
  return out;
}

TrainSummary run_training(const RunConfig& c, const fs::path& out_dir,
                          const std::shared_ptr<const Dataset>& data) {
  fs::create_directories(out_dir);
  RunConfig resolved = c;
  resolved.output_dir = out_dir.string();
  {
    std::ofstream snap(out_dir / "config.resolved.yaml", std::ios::trunc);
    snap << dump_config(resolved);
  }
  auto env = make_env(c.env);
  Rng init = make_stream(c.seed, "init");
  AfbcAgent agent(data->state_dim(), data->action_dim(), c.agent, init);
  ReplayBuffer buffer(data, c.replay);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
  TrainSummary summary = train(agent, buffer, *env, c.train, c.seed, &log);
  log.close();
  numkit::save_checkpoint(out_dir / "actor.ckpt", agent.actor().trunk(),
                          checkpoint_metadata(c, data->state_dim(), data->action_dim()));
  emit_report(out_dir);
  return summary;
}

namespace {

int cmd_collect(const std::string& env_id, const fs::path& out, int episodes_per_block,
                int blocks, std::size_t min_per_tier, std::uint64_t seed) {
  auto env = make_env(env_id);
  CollectConfig cfg;
  cfg.episodes_per_block = episodes_per_block;
  cfg.blocks = blocks;
  cfg.min_per_tier = min_per_tier;
  Rng rng = make_stream(seed, "collect");
  std::size_t discarded = 0;
  TierStore store = collect_snapshots(*env, cfg, rng, &discarded);
  DatasetManifest m;
  m.recipe = "tiers";
  m.env_id = env_id;
  m.seed = seed;
  m.blocks = store.blocks;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  m = save_dataset(store.data, m, out);
  std::cout << "collected " << m.total << " transitions in " << m.blocks.size() << " blocks ("
            << discarded << " discarded) -> " << out.string() << '\n';
  for (std::size_t t = 0; t < kTierCount; ++t) {
    std::cout << "  " << tier_name(static_cast<Tier>(t)) << ": " << m.tier_counts[t] << '\n';
  }
  return kExitOk;
}

int cmd_build(const std::string& recipe, std::size_t budget, const std::string& tiers,
              const fs::path& out, std::uint64_t seed) {
  RunConfig c;
  c.dataset.recipe = recipe;
  c.dataset.budget = budget;
  c.dataset.tiers = tiers;
  c.dataset.seed = seed;
  if (recipe.rfind("mc-", 0) != 0) {
    parse_recipe(recipe);
    if (tiers.empty()) throw ConfigError("--tiers is required for recipe " + recipe);
    c.env = load_tier_store(tiers).env.id;
  }
  StoredDataset ds = prepare_dataset(c);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const DatasetManifest m = save_dataset(ds.data, ds.manifest, out);
  std::cout << format_manifest(m);
  return kExitOk;
}

int cmd_train(const fs::path& config_path, std::optional<std::uint64_t> seed,
              const std::string& out, int seeds) {
  ParsedConfig parsed = config_path.empty() ? parse_config("", "<defaults>")
                                            : validate_config(config_path);
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << '\n';
  RunConfig c = parsed.config;
  if (seed) c.seed = *seed;
  fs::path out_dir = !out.empty()                ? fs::path(out)
                     : !c.output_dir.empty()     ? fs::path(c.output_dir)
                                                 : output_root() / ("train-seed" + std::to_string(c.seed));
  if (seeds < 1) throw ConfigError("--seeds must be >= 1");

  fs::create_directories(out_dir);
  {
    RunConfig snapshot = c;
    snapshot.output_dir = out_dir.string();
    std::ofstream(out_dir / "config.resolved.yaml", std::ios::trunc) << dump_config(snapshot);
  }
  const auto data = std::make_shared<const Dataset>(prepare_dataset(c).data);

  if (seeds == 1) {
    const TrainSummary s = run_training(c, out_dir, data);
    const EvalPoint& last = s.evals.back();
    std::cout << "step " << last.step << ": return " << last.mean_return << ", goal rate "
              << last.goal_rate << ", mean approval " << s.mean_approval << " -> "
              << out_dir.string() << '\n';
    return kExitOk;
  }

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(seeds));
  for (int k = 0; k < seeds; ++k) {
    workers.emplace_back([&, k] {
      try {
        RunConfig ck = c;
        ck.seed = c.seed + static_cast<std::uint64_t>(k);
        run_training(ck, out_dir / ("seed_" + std::to_string(ck.seed)), data);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  emit_report(out_dir);
  std::cout << "trained " << seeds << " seeds -> " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint, int episodes, std::uint64_t seed) {
  numkit::Checkpoint ck = numkit::load_checkpoint(checkpoint);
  auto get = [&](const std::string& key) {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw DataError("checkpoint lacks meta." + key);
    return it->second;
  };
  PolicyConfig pc;
  pc.log_std_min = std::stod(get("log_std_min"));
  pc.log_std_max = std::stod(get("log_std_max"));
  SquashedGaussianPolicy policy(std::move(ck.net), pc);
  auto env = make_env(get("env"));
  Rng rng = make_stream(seed, "evaluate");
  const EvalResult r = evaluate_policy(policy, *env, episodes, rng);
  std::cout << "{\"mean_return\": " << r.mean_return() << ", \"goal_rate\": " << r.goal_rate()
            << ", \"episodes\": " << episodes << "}\n";
  return kExitOk;
}

int cmd_report(const fs::path& run_dir) {
  for (const auto& p : emit_report(run_dir)) std::cout << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Advantage-filtered behavioural cloning laboratory"};
  app.require_subcommand(1);

  std::string env_id = "pendulum_swingup";
  std::string out;
  int episodes_per_block = 10;
  int blocks = 60;
  std::size_t min_per_tier = 0;
  std::uint64_t seed = 0;
  auto* collect = app.add_subcommand("collect", "record graded policy blocks into a tier store");
  collect->add_option("--env", env_id, "environment id")->capture_default_str();
  collect->add_option("--out", out, "output dataset path")->required();
  collect->add_option("--episodes-per-block", episodes_per_block)->capture_default_str();
  collect->add_option("--blocks", blocks, "minimum number of blocks")->capture_default_str();
  collect->add_option("--min-per-tier", min_per_tier, "keep recording until every tier has this many transitions");
  collect->add_option("--seed", seed)->capture_default_str();

  std::string recipe;
  std::size_t budget = 0;
  std::string tiers;
  auto* build = app.add_subcommand("build-dataset", "compose a dataset recipe");
  build->add_option("--recipe", recipe, "great-expert ... stitching, or mc-expert, mc-random-expert, mc-adversarial-expert")->required();
  build->add_option("--budget", budget, "total samples (0 = recipe default)");
  build->add_option("--tiers", tiers, "tier store written by collect");
  build->add_option("--out", out)->required();
  build->add_option("--seed", seed)->capture_default_str();

  std::string config_path;
  std::optional<std::uint64_t> train_seed;
  int seeds = 1;
  auto* train_cmd = app.add_subcommand("train", "train an agent from a config file");
  train_cmd->add_option("--config", config_path, "YAML run config")->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--out", out, "output directory");
  train_cmd->add_option("--seeds", seeds, "independent seeds seed..seed+N-1 run in parallel");

  std::string checkpoint;
  int episodes = 10;
  auto* evaluate = app.add_subcommand("evaluate", "mean-action rollouts of a saved actor");
  evaluate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--episodes", episodes)->capture_default_str();
  evaluate->add_option("--seed", seed)->capture_default_str();

  std::string run_dir;
  auto* report = app.add_subcommand("report", "regenerate scores, curves and plots of a run");
  report->add_option("--run-dir", run_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*collect) return cmd_collect(env_id, out, episodes_per_block, blocks, min_per_tier, seed);
    if (*build) return cmd_build(recipe, budget, tiers, out, seed);
    if (*train_cmd) return cmd_train(config_path, train_seed, out, seeds);
    if (*evaluate) return cmd_evaluate(checkpoint, episodes, seed);
    if (*report) return cmd_report(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace afbc
