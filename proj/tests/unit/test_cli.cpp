#include <fstream>
#include <sstream>

#include "afbc/cli.hpp"
#include "afbc/errors.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace afbc;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "afbc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

constexpr const char* kSmallRun = R"(env: mountain_car_1d
dataset:
  recipe: mc-expert
  budget: 400
train:
  mode: afbc_per
  steps: 30
  batch_size: 16
  eval_interval: 15
  eval_episodes: 1
  probe_size: 8
agent:
  hidden: [8, 8]
)";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty config gives the defaults") {
    const ParsedConfig p = parse_config("");
    CHECK(p.warnings.empty());
    CHECK(p.config.train == TrainConfig{});
    CHECK(p.config.agent == AgentConfig{});
    CHECK(p.config.replay == ReplayConfig{});
  }

  TEST_CASE("out-of-range values name the field") {
    CHECK(config_error("replay:\n  alpha: 1.5\n").find("replay.alpha") != std::string::npos);
    CHECK(config_error("agent:\n  subset_size: 5\n").find("agent.subset_size") !=
          std::string::npos);
    CHECK(!config_error("train:\n  batch_size: 0\n").empty());
    CHECK(!config_error("filter:\n  kind: softmax\n").empty());
  }

  TEST_CASE("unknown keys are rejected with their line") {
    const std::string msg = config_error("seed: 1\nagent:\n  hiden: [4]\n");
    CHECK(msg.find("hiden") != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }

  TEST_CASE("fields the filter ignores produce a warning") {
    const ParsedConfig p = parse_config("filter:\n  kind: binary\n  beta: 2.0\n");
    REQUIRE(p.warnings.size() == 1);
    CHECK(p.warnings[0].find("filter.beta") != std::string::npos);
  }

  TEST_CASE("dump and parse round trip") {
    RunConfig c;
    c.env = "pendulum_swingup";
    c.seed = 11;
    c.dataset.recipe = "signal-4";
    c.dataset.tiers = "tiers.bin";
    c.dataset.budget = 1234;
    c.train.mode = TrainMode::kAfbcUniform;
    c.train.steps = 777;
    c.agent.hidden = {32, 16, 8};
    c.agent.ensemble_size = 10;
    c.agent.subset_size = 2;
    c.agent.popart = true;
    c.agent.estimator = AdvantageEstimator::kMonteCarlo;
    c.agent.filter.kind = FilterKind::kExponential;
    c.agent.filter.beta = 0.3;
    c.replay.alpha = 0.25;
    c.replay.priority.scheme = PriorityScheme::kBinary;
    const std::string text = dump_config(c);
    const ParsedConfig back = parse_config(text);
    CHECK(back.warnings.empty());
    CHECK(back.config == c);
    CHECK(dump_config(back.config) == text);
  }

  TEST_CASE("build-dataset composes a tiered recipe") {
    test::TempDir dir;
    const fs::path tiers = dir.path() / "tiers.bin";
    REQUIRE(cli({"collect", "--env", "pendulum_swingup", "--out", tiers.string(),
                 "--episodes-per-block", "2", "--blocks", "20", "--min-per-tier", "400"}) == 0);
    const fs::path out = dir.path() / "ge.bin";
    REQUIRE(cli({"build-dataset", "--recipe", "great-expert", "--budget", "600", "--tiers",
                 tiers.string(), "--out", out.string()}) == 0);
    const StoredDataset ds = load_dataset(out);
    CHECK(ds.data.size() == 600);
    CHECK(ds.manifest.tier_counts[static_cast<std::size_t>(Tier::kGood)] == 300);
    CHECK(ds.manifest.tier_counts[static_cast<std::size_t>(Tier::kExpert)] == 300);
    CHECK(ds.manifest.env_id == "pendulum_swingup");
  }

  TEST_CASE("training the same seed twice is byte-identical") {
    test::TempDir dir;
    const fs::path cfg = dir.path() / "run.yaml";
    std::ofstream(cfg) << kSmallRun;
    for (const char* name : {"a", "b"}) {
      REQUIRE(cli({"train", "--config", cfg.string(), "--seed", "7", "--out",
                   (dir.path() / name).string()}) == 0);
    }
    for (const char* file : {"train_log.jsonl", "report/score.csv", "report/curves.csv",
                             "report/histograms.csv", "report/returns.svg", "actor.ckpt"}) {
      INFO(file);
      const std::string a = slurp(dir.path() / "a" / file);
      CHECK(!a.empty());
      CHECK(a == slurp(dir.path() / "b" / file));
    }
    CHECK(cli({"evaluate", "--checkpoint", (dir.path() / "a" / "actor.ckpt").string(),
               "--episodes", "1"}) == 0);
    CHECK(cli({"report", "--run-dir", (dir.path() / "a").string()}) == 0);
  }

  TEST_CASE("several seeds land in per-seed directories") {
    test::TempDir dir;
    const fs::path cfg = dir.path() / "run.yaml";
    std::ofstream(cfg) << kSmallRun;
    REQUIRE(cli({"train", "--config", cfg.string(), "--seeds", "2", "--out",
                 (dir.path() / "multi").string()}) == 0);
    CHECK(fs::exists(dir.path() / "multi" / "seed_0" / "train_log.jsonl"));
    CHECK(fs::exists(dir.path() / "multi" / "seed_1" / "train_log.jsonl"));
    CHECK(fs::exists(dir.path() / "multi" / "report" / "score.csv"));
  }

  TEST_CASE("exit codes") {
    test::TempDir dir;
    const fs::path bad = dir.path() / "bad.yaml";
    std::ofstream(bad) << "replay:\n  alpha: 1.5\n";
    CHECK(cli({"train", "--config", bad.string()}) == 2);
    CHECK(cli({"frobnicate"}) == 2);
    CHECK(cli({"build-dataset", "--recipe", "no-such-recipe", "--out",
               (dir.path() / "x.bin").string()}) == 2);
    const fs::path missing = dir.path() / "missing.yaml";
    std::ofstream(missing) << "dataset:\n  path: " << (dir.path() / "nope.bin").string() << '\n';
    CHECK(cli({"train", "--config", missing.string(), "--out", (dir.path() / "o").string()}) == 3);
    CHECK(cli({"report", "--run-dir", (dir.path() / "empty").string()}) == 3);
  }
}
