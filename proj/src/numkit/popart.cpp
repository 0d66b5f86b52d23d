#include "afbc/numkit/popart.hpp"

#include <algorithm>
#include <cmath>

#include "afbc/errors.hpp"

namespace afbc::numkit {

PopArtStats::PopArtStats(PopArtConfig config)
    : config_(config), mu_(config.mu_init), nu_(config.nu_init) {
  if (!(config.beta > 0.0 && config.beta <= 1.0)) {
    throw ConfigError("PopArt beta must lie in (0, 1]");
  }
  if (!(config.sigma_min > 0.0)) throw ConfigError("PopArt sigma_min must be positive");
  if (config.nu_init < config.mu_init * config.mu_init) {
    throw ConfigError("PopArt nu_init must be at least mu_init^2");
  }
}

double PopArtStats::sigma() const {
  const double floor = config_.sigma_min * config_.sigma_min;
  return std::sqrt(std::max(nu_ - mu_ * mu_, floor));
}

double PopArtStats::step_size() const {
  const double beta = config_.beta;
  const double t = static_cast<double>(updates_);
  switch (config_.schedule) {
    case PopArtSchedule::kHarmonic:
      return beta / (1.0 + t * beta);
    case PopArtSchedule::kUnbiasedConstant:
      break;
  }
  return beta / (1.0 - std::pow(1.0 - beta, t + 1.0));
}

void popart_update(PopArtStats& stats, std::span<MlpNet* const> heads,
                   std::span<const double> targets) {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (double y : targets) {
    if (!std::isfinite(y)) {
      ++stats.skipped_;
      continue;
    }
    sum += y;
    sum_sq += y * y;
    ++n;
  }
  if (n == 0) return;

  const double batch_mean = sum / static_cast<double>(n);
  const double batch_sq = sum_sq / static_cast<double>(n);
  const double old_mu = stats.mu_;
  const double old_sigma = stats.sigma();

  const double step = stats.step_size();
  stats.mu_ = (1.0 - step) * stats.mu_ + step * batch_mean;
  stats.nu_ = (1.0 - step) * stats.nu_ + step * batch_sq;
  ++stats.updates_;
  const double new_sigma = stats.sigma();

  // sigma' * (W' h + b') + mu' == sigma * (W h + b) + mu for all h.
  const double scale = old_sigma / new_sigma;
  const double shift = (old_mu - stats.mu_) / new_sigma;
  for (MlpNet* net : heads) {
    auto& out = net->output_layer();
    out.weight *= scale;
    out.bias = (out.bias * scale).array() + shift;
  }
}

}  // namespace afbc::numkit
