#include "afbc/replay.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "afbc/errors.hpp"

namespace afbc {

PriorityTree::PriorityTree(std::size_t size, double alpha, double min_priority)
    : size_(size),
      capacity_(std::bit_ceil(std::max<std::size_t>(size, 1))),
      alpha_(alpha),
      min_priority_(min_priority),
      nodes_(2 * capacity_, 0.0) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("priority alpha must lie in [0, 1]");
  if (!(min_priority > 0.0)) throw ConfigError("priority epsilon must be positive");
  const double initial = std::pow(1.0, alpha);
  for (std::size_t i = 0; i < size_; ++i) nodes_[capacity_ + i] = initial;
  for (std::size_t k = capacity_; k-- > 1;) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
}

void PriorityTree::set_priority(std::size_t index, double raw) {
  if (index >= size_) {
    throw UsageError("priority index " + std::to_string(index) + " out of range (size " +
                     std::to_string(size_) + ")");
  }
  if (!(raw >= 0.0)) throw UsageError("priority must be non-negative, got " + std::to_string(raw));
  std::size_t k = capacity_ + index;
  nodes_[k] = std::pow(std::max(raw, min_priority_), alpha_);
  for (k /= 2; k >= 1; k /= 2) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
}

std::size_t PriorityTree::sample_prefix(double u) const {
  if (size_ == 0) throw UsageError("sample from an empty priority tree");
  if (!(total() > 0.0)) throw UsageError("sample from a priority tree with zero total");
  std::size_t k = 1;
  while (k < capacity_) {
    const double left = nodes_[2 * k];
    if (u < left) {
      k = 2 * k;
    } else {
      u -= left;
      k = 2 * k + 1;
    }
  }
  const std::size_t index = k - capacity_;
  // Rounding can walk past the last real leaf into the phantom padding.
  return index < size_ ? index : size_ - 1;
}

double raw_priority(const PrioritySchemeConfig& config, double advantage) {
  switch (config.scheme) {
    case PriorityScheme::kBinary:
      return (advantage >= 0.0 ? 1.0 : 0.0) + config.epsilon;
    case PriorityScheme::kClippedAdvantage:
      break;
  }
  return std::max(advantage, config.epsilon);
}

ReplayBuffer::ReplayBuffer(std::shared_ptr<const Dataset> data, ReplayConfig config)
    : data_(std::move(data)),
      config_(config),
      tree_(data_ ? data_->size() : 0, config.alpha, config.priority.epsilon) {
  if (!data_) throw ConfigError("replay buffer needs a dataset");
}

Batch ReplayBuffer::sample_uniform(std::size_t batch_size, Rng& rng) const {
  if (data_->empty()) throw UsageError("sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_->size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return data_->gather(idx);
}

Batch ReplayBuffer::sample_prioritized(std::size_t batch_size, Rng& rng) const {
  if (data_->empty()) throw UsageError("sample from an empty replay buffer");
  if (config_.alpha == 0.0) return sample_uniform(batch_size, rng);
  const double total = tree_.total();
  if (!(total > 0.0) || !std::isfinite(total)) {
    ++fallbacks_;
    return sample_uniform(batch_size, rng);
  }
  const double segment = total / static_cast<double>(batch_size);
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const double u = segment * (static_cast<double>(i) + uniform01(rng));
    idx[i] = tree_.sample_prefix(u);
  }
  return data_->gather(idx);
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> advantages) {
  if (indices.size() != advantages.size()) {
    throw UsageError("update_priorities: index/advantage counts differ");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (!std::isfinite(advantages[k])) {
      ++skipped_;
      continue;
    }
    tree_.set_priority(indices[k], raw_priority(config_.priority, advantages[k]));
  }
}

}  // namespace afbc
