#ifndef AFBC_NUMKIT_POPART_HPP
#define AFBC_NUMKIT_POPART_HPP

#include <cstdint>
#include <span>

#include "afbc/numkit/mlp.hpp"

namespace afbc::numkit {

// Step size used when moving the running moments toward a batch's moments.
enum class PopArtSchedule {
  // beta / (1 - (1 - beta)^(t + 1)): bias-corrected constant step, forgets the
  // initial moments after the first update.
  kUnbiasedConstant,
  // beta / (1 + t * beta)
  kHarmonic,
};

struct PopArtConfig {
  double beta = 3e-4;
  double sigma_min = 1e-4;
  double mu_init = 0.0;
  double nu_init = 100.0;
  PopArtSchedule schedule = PopArtSchedule::kUnbiasedConstant;

  bool operator==(const PopArtConfig&) const = default;
};

/// Running first/second moments of regression targets. Networks attached to
/// these statistics output normalized values; the de-normalized prediction is
/// sigma() * f(x) + mu().
class PopArtStats {
 public:
  PopArtStats() : PopArtStats(PopArtConfig{}) {}
  explicit PopArtStats(PopArtConfig config);

  double mu() const { return mu_; }
  double nu() const { return nu_; }
  double sigma() const;
  std::uint64_t updates() const { return updates_; }
  std::uint64_t skipped_targets() const { return skipped_; }
  const PopArtConfig& config() const { return config_; }

  double step_size() const;
  double normalize(double y) const { return (y - mu_) / sigma(); }
  double denormalize(double f) const { return sigma() * f + mu_; }

 private:
  friend void popart_update(PopArtStats&, std::span<MlpNet* const>, std::span<const double>);

  PopArtConfig config_;
  double mu_;
  double nu_;
  std::uint64_t updates_ = 0;
  std::uint64_t skipped_ = 0;
};

/// Moves the statistics toward the batch moments of `targets` and rescales the
/// output layer of every network in `heads` so that sigma * f(x) + mu is
/// unchanged for every x. Non-finite targets are skipped and counted; a batch
/// with no finite target leaves everything untouched.
void popart_update(PopArtStats& stats, std::span<MlpNet* const> heads,
                   std::span<const double> targets);

}  // namespace afbc::numkit

#endif  // AFBC_NUMKIT_POPART_HPP
