#ifndef AFBC_EVALKIT_HPP
#define AFBC_EVALKIT_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "afbc/agents.hpp"

namespace afbc {

struct LearningCurve {
  std::vector<std::uint64_t> steps;  // strictly increasing
  std::vector<double> values;
  std::string seed_id;
};

/// y'_0 = y_0, y'_t = coeff * y'_{t-1} + (1 - coeff) * y_t. Throws UsageError
/// on empty input or coeff outside [0, 1).
std::vector<double> smooth(std::span<const double> values, double coeff = 0.65);
LearningCurve smooth(const LearningCurve& curve, double coeff = 0.65);

struct ScoreReport {
  double mean = 0.0;
  double two_std = 0.0;  // twice the window-averaged cross-seed standard deviation
  double ci95 = 0.0;     // half-width of the 95% t-interval of the cross-seed mean
  std::size_t n_seeds = 0;
  std::size_t window = 0;
};

/// Smooths every seed's curve, forms the pointwise cross-seed mean and sample
/// standard deviation, then averages both over the last `window` evaluations
/// (all of them if fewer). Throws UsageError on no curves, mismatched steps or
/// an empty curve.
ScoreReport score(std::span<const LearningCurve> curves, std::size_t window = 10,
                  double coeff = 0.65);

struct Histogram {
  std::vector<double> edges;  // bins + 1, increasing
  std::vector<std::size_t> counts;
  double range = 0.0;  // symmetric half-width R of the interior bins
  std::size_t total() const;
};

/// `bins` uniform bins over [-R, R] with R = max(|p1|, |p99|) of the values
/// (R = 1 if that is zero). The two outermost edges stretch to the observed
/// extremes so every value lands in some bin.
Histogram advantage_histogram(std::span<const double> advantages, int bins = 61);
/// Histogram of the agent's advantage estimates on a fixed probe batch.
Histogram advantage_histogram(const AfbcAgent& agent, const Batch& probe, Rng& rng,
                              int bins = 61);

// Parsed training log of one seed.
struct RunLog {
  std::string seed_id;
  std::filesystem::path path;
  LearningCurve returns;
  LearningCurve goal_rate;
  LearningCurve approval;
  std::vector<std::uint64_t> probe_steps;
  std::vector<std::vector<double>> probe_advantages;
};

/// An empty `seed_id` is taken from the log's config record.
RunLog parse_train_log(const std::filesystem::path& path, std::string seed_id);

/// Logs of a run directory: `train_log.jsonl` directly inside it, or one per
/// `seed_*` subdirectory. Throws DataError listing what was looked for.
std::vector<RunLog> load_run(const std::filesystem::path& run_dir);

/// Writes run_dir/report/{score,curves,goal_rate,approval,histograms}.csv plus
/// returns.svg and approval.svg. Output bytes depend only on the logs.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& run_dir);

}  // namespace afbc

#endif  // AFBC_EVALKIT_HPP
