#ifndef AFBC_DATASETS_HPP
#define AFBC_DATASETS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "afbc/envlab.hpp"
#include "afbc/errors.hpp"
#include "afbc/numkit/mlp.hpp"
#include "afbc/rng.hpp"

namespace afbc {

using numkit::Matrix;

enum class Tier : std::uint8_t { kVeryBad = 0, kBad = 1, kOkay = 2, kGood = 3, kExpert = 4 };
inline constexpr std::size_t kTierCount = 5;
inline constexpr std::uint8_t kUnlabeledTier = 255;

const char* tier_name(Tier tier);

/// Even five-way split of [low, high]; returns outside the range clamp to the end tiers.
Tier tier_for_return(double average_return, double low, double high);

struct Transition {
  Vector s;
  Vector a;
  double r = 0.0;
  Vector s_next;
  bool done = false;  // true termination only; time-limit truncation is not done
};

// Gathered minibatch, one column per sample.
struct Batch {
  std::vector<std::size_t> indices;
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;           // 1.0 for terminal transitions
  Vector returns_to_go;   // empty unless the dataset carries them

  std::size_t size() const { return indices.size(); }
};

/// Column store of transitions. Sample i occupies columns i of the state,
/// action and next-state blocks.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int state_dim, int action_dim);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  std::size_t size() const { return rewards_.size(); }
  bool empty() const { return rewards_.empty(); }
  bool has_returns_to_go() const { return !returns_to_go_.empty() || empty(); }

  void push_back(const Transition& t, std::uint8_t tier = kUnlabeledTier,
                 double return_to_go = std::numeric_limits<double>::quiet_NaN());
  void append(const Dataset& other, std::size_t index);
  void reserve(std::size_t n);

  Transition at(std::size_t i) const;
  std::uint8_t tier(std::size_t i) const { return tiers_[i]; }
  double return_to_go(std::size_t i) const;

  Batch gather(std::span<const std::size_t> indices) const;

  std::array<std::size_t, kTierCount> tier_counts() const;
  std::size_t unlabeled_count() const;

  // Raw columns (used by the file format and tests).
  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& actions() const { return actions_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<double>& next_states() const { return next_states_; }
  const std::vector<std::uint8_t>& dones() const { return dones_; }
  const std::vector<std::uint8_t>& tiers() const { return tiers_; }
  const std::vector<double>& returns_to_go() const { return returns_to_go_; }

  bool operator==(const Dataset& other) const;

  /// Parses the binary payload layout written by encode_payload().
  static Dataset decode_payload(std::span<const unsigned char> bytes, int state_dim,
                                int action_dim, std::size_t count, bool has_returns_to_go);

 private:

  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<std::uint8_t> dones_;
  std::vector<std::uint8_t> tiers_;
  std::vector<double> returns_to_go_;
};

// One recording block: a fixed policy snapshot run for several episodes.
struct BlockInfo {
  double average_return = 0.0;
  Tier tier = Tier::kVeryBad;
  bool uniform_random = false;  // pure uniform-random behaviour
  std::size_t begin = 0;        // transition range in the owning dataset
  std::size_t end = 0;

  bool operator==(const BlockInfo&) const = default;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string recipe;
  std::string env_id;
  std::uint64_t seed = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::size_t total = 0;
  std::array<std::size_t, kTierCount> tier_counts{};
  std::size_t unlabeled_count = 0;
  bool has_returns_to_go = false;
  std::uint64_t checksum = 0;  // FNV-1a 64 over the binary payload
  std::vector<BlockInfo> blocks;

  bool operator==(const DatasetManifest&) const = default;
};

struct StoredDataset {
  Dataset data;
  DatasetManifest manifest;
};

// ------------------------------------------------------------- collection

// Per-step behaviour of a data-collection policy. Receives the observation.
using ActionFn = std::function<Vector(const Vector& observation, Rng& rng)>;

struct Episode {
  Dataset transitions;
  double undiscounted_return = 0.0;
  bool reached_terminal = false;
};

/// Runs one episode. Transitions carry discounted return-to-go under `gamma`.
Episode rollout(Env& env, const ActionFn& policy, Rng& rng, double gamma = 0.99);

// Scripted graded-quality behaviour: with probability `quality` the expert
// acts (with small Gaussian jitter); otherwise the block's bad behaviour does.
enum class BadBehaviour : std::uint8_t { kUniformRandom, kDamping, kReversedExpert };

struct GradedPolicySpec {
  double quality = 0.0;
  BadBehaviour bad = BadBehaviour::kUniformRandom;
  double expert_noise = 0.1;
};

ActionFn graded_policy(const Env& env, const GradedPolicySpec& spec);

struct CollectConfig {
  int episodes_per_block = 10;
  int blocks = 60;                // recorded at least this many blocks
  std::size_t min_per_tier = 0;   // then keep going until every tier has this many
  int max_blocks = 1000;
  double gamma = 0.99;
};

struct TierStore {
  EnvSpec env;
  Dataset data;                  // every transition carries its block's tier
  std::vector<BlockInfo> blocks;
};

/// Records blocks of graded scripted policies and tags every block with the
/// arithmetic mean of its episodes' undiscounted returns. Qualities cover
/// [0, 1] so every tier is populated. Blocks whose policy produces a
/// non-finite value are discarded and counted in `discarded`.
TierStore collect_snapshots(const Env& env, const CollectConfig& config, Rng& rng,
                            std::size_t* discarded = nullptr);

/// Re-derives tiers from block returns; idempotent.
void rebin(TierStore& store);

// ------------------------------------------------------------- composition

enum class Recipe {
  kGreatExpert,
  kOkayExpert,
  kBadExpert,
  kVeryBadExpert,
  kSignal1,
  kSignal2,
  kSignal3,
  kSignal4,
  kStitching,
};

const char* recipe_name(Recipe recipe);
Recipe parse_recipe(const std::string& name);  // throws ConfigError
std::vector<Recipe> all_recipes();

struct ComposeConfig {
  std::size_t expert_budget = 2000;  // fixed expert count for the Signal recipes
};

/// Default desk-scale total sample count for a recipe.
std::size_t default_budget(Recipe recipe);

/// Exact per-tier sample counts for a recipe at `budget` total samples.
std::array<std::size_t, kTierCount> recipe_counts(Recipe recipe, std::size_t budget,
                                                  const ComposeConfig& config = {});

/// Samples without replacement per tier. Throws CompositionError (a DataError)
/// listing every tier deficit when the store is too small.
StoredDataset compose(Recipe recipe, const TierStore& store, std::size_t budget, Rng& rng,
                      const ComposeConfig& config = {});

class CompositionError : public DataError {
 public:
  CompositionError(const std::string& what, std::array<std::size_t, kTierCount> deficits)
      : DataError(what), deficits_(deficits) {}
  const std::array<std::size_t, kTierCount>& deficits() const { return deficits_; }

 private:
  std::array<std::size_t, kTierCount> deficits_;
};

// ---------------------------------------------------------- Mountain Car sets

struct MountainCarSets {
  StoredDataset expert;
  StoredDataset random_mix;       // 9:1 random : expert
  StoredDataset adversarial_mix;  // 9:1 worst-case : expert
};

struct MountainCarSetConfig {
  std::size_t expert_size = 10000;  // size of the pure expert set
  std::size_t mixed_size = 100000;  // size of each 9:1 set
  double gamma = 0.99;
  std::size_t max_mining_steps = 20'000'000;
};

class MiningError : public DataError {
 public:
  MiningError(const std::string& what, std::size_t mined, std::size_t steps)
      : DataError(what), mined_(mined), steps_(steps) {}
  std::size_t mined() const { return mined_; }
  std::size_t steps() const { return steps_; }

 private:
  std::size_t mined_;
  std::size_t steps_;
};

/// Expert transitions are tagged Expert; random and mined worst-case
/// transitions are tagged VeryBad.
/// Scripted Mountain-Car expert with Gaussian jitter in pre-squash space.
ActionFn mountain_car_expert_policy(double noise = 0.5);
ActionFn uniform_random_policy(int action_dim);

MountainCarSets build_mountain_car_sets(const ActionFn& expert_policy, Rng& rng,
                                        const MountainCarSetConfig& config = {},
                                        const MountainCarConfig& env_config = {});

// --------------------------------------------------------------------- I/O

enum class LoadErrorKind { kIo, kTruncated, kChecksumMismatch, kVersionMismatch, kMalformed };

class DatasetLoadError : public DataError {
 public:
  DatasetLoadError(LoadErrorKind kind, const std::string& what)
      : DataError(what), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

std::filesystem::path manifest_path(const std::filesystem::path& payload);

/// Writes the payload to `path` and the manifest to `path` + ".manifest".
/// Fills counts, dimensions and checksum of `manifest` from the data.
DatasetManifest save_dataset(const Dataset& data, DatasetManifest manifest,
                             const std::filesystem::path& path);
StoredDataset load_dataset(const std::filesystem::path& path);

std::vector<unsigned char> encode_payload(const Dataset& data);
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);

}  // namespace afbc

#endif  // AFBC_DATASETS_HPP
