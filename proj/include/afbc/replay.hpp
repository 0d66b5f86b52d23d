#ifndef AFBC_REPLAY_HPP
#define AFBC_REPLAY_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "afbc/datasets.hpp"
#include "afbc/rng.hpp"

namespace afbc {

/// Prefix-sum tree over per-transition priorities. Leaves store
/// max(raw, min_priority)^alpha; capacity is padded to a power of two with
/// zero-priority phantom leaves that can never be sampled.
class PriorityTree {
 public:
  PriorityTree(std::size_t size, double alpha, double min_priority = 1e-3);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  double alpha() const { return alpha_; }
  double min_priority() const { return min_priority_; }

  /// Throws UsageError on an out-of-range index or a negative/NaN priority.
  void set_priority(std::size_t index, double raw_priority);
  double leaf(std::size_t index) const { return nodes_[capacity_ + index]; }
  double total() const { return nodes_[1]; }
  // Internal node k (1-based heap layout; children 2k and 2k+1).
  double node(std::size_t k) const { return nodes_[k]; }

  /// Leaf whose cumulative interval [c_{i-1}, c_i) contains u. Throws
  /// UsageError on an empty tree or a non-positive total.
  std::size_t sample_prefix(double u) const;

 private:
  std::size_t size_;
  std::size_t capacity_;
  double alpha_;
  double min_priority_;
  std::vector<double> nodes_;  // nodes_[0] unused
};

enum class PriorityScheme { kClippedAdvantage, kBinary };

struct PrioritySchemeConfig {
  PriorityScheme scheme = PriorityScheme::kClippedAdvantage;
  double epsilon = 1e-3;

  bool operator==(const PrioritySchemeConfig&) const = default;
};

/// clipped: max(A, eps); binary: 1{A >= 0} + eps.
double raw_priority(const PrioritySchemeConfig& config, double advantage);

struct ReplayConfig {
  double alpha = 0.6;
  PrioritySchemeConfig priority;

  bool operator==(const ReplayConfig&) const = default;
};

// Offline replay over a fixed dataset. Samples carry transitions and indices
// only; no importance weights exist anywhere on this path.
class ReplayBuffer {
 public:
  ReplayBuffer(std::shared_ptr<const Dataset> data, ReplayConfig config = {});

  std::size_t size() const { return data_->size(); }
  const Dataset& data() const { return *data_; }
  const PriorityTree& tree() const { return tree_; }
  const ReplayConfig& config() const { return config_; }

  /// i.i.d. uniform indices with replacement.
  Batch sample_uniform(std::size_t batch_size, Rng& rng) const;

  /// Stratified proportional sampling: slot i draws u uniformly from the i-th
  /// of batch_size equal sub-intervals of the total priority. With alpha = 0
  /// every leaf is equal and this delegates to sample_uniform.
  Batch sample_prioritized(std::size_t batch_size, Rng& rng) const;

  /// Stores raw_priority(advantage) for each index. Non-finite advantages are skipped
  /// and counted.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> advantages);

  std::uint64_t skipped_updates() const { return skipped_; }
  std::uint64_t uniform_fallbacks() const { return fallbacks_; }

 private:
  std::shared_ptr<const Dataset> data_;
  ReplayConfig config_;
  PriorityTree tree_;
  std::uint64_t skipped_ = 0;
  mutable std::uint64_t fallbacks_ = 0;
};

}  // namespace afbc

#endif  // AFBC_REPLAY_HPP
