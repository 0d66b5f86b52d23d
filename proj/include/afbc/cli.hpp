#ifndef AFBC_CLI_HPP
#define AFBC_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "afbc/agents.hpp"
#include "afbc/datasets.hpp"
#include "afbc/replay.hpp"

namespace afbc {

// Where the training data comes from: an existing dataset file, or a recipe
// built in-process (the mc-* recipes need nothing else; the nine tiered
// recipes need a tier store written by `collect`).
struct DatasetSource {
  std::string path;
  std::string recipe;
  std::size_t budget = 0;  // 0 = recipe default
  std::string tiers;
  std::uint64_t seed = 0;  // dataset stays fixed across training seeds

  bool operator==(const DatasetSource&) const = default;
};

struct RunConfig {
  std::string env = "mountain_car_1d";
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetSource dataset;
  TrainConfig train;
  AgentConfig agent;
  ReplayConfig replay;

  bool operator==(const RunConfig&) const = default;
};

struct ParsedConfig {
  RunConfig config;
  std::vector<std::string> warnings;  // e.g. fields the chosen options ignore
};

/// Parses YAML text, applies defaults and range-checks every field. Throws
/// ConfigError carrying the field path and source line.
ParsedConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ParsedConfig validate_config(const std::filesystem::path& path);

/// Fully materialized YAML. parse_config(dump_config(c)).config == c.
std::string dump_config(const RunConfig& config);

/// Default output root: $AFBC_OUTPUT_ROOT if set, else "runs".
std::filesystem::path output_root();

/// Loads or builds the dataset a config names.
StoredDataset prepare_dataset(const RunConfig& config);

/// Trains one seed into `out_dir` (resolved config, JSONL log, actor
/// checkpoint, report) and returns the summary.
TrainSummary run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                          const std::shared_ptr<const Dataset>& data);

/// Entry point of the `afbc` tool. Exit codes: 0 success, 2 configuration
/// error, 3 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace afbc

#endif  // AFBC_CLI_HPP
