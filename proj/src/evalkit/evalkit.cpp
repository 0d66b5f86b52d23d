#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "afbc/errors.hpp"
#include "afbc/evalkit.hpp"

namespace afbc {

std::vector<double> smooth(std::span<const double> values, double coeff) {
  if (values.empty()) throw UsageError("smooth: empty curve");
  if (!(coeff >= 0.0 && coeff < 1.0)) throw UsageError("smooth: coeff must lie in [0, 1)");
  std::vector<double> out(values.size());
  out[0] = values[0];
  for (std::size_t t = 1; t < values.size(); ++t) {
    out[t] = coeff * out[t - 1] + (1.0 - coeff) * values[t];
  }
  return out;
}

LearningCurve smooth(const LearningCurve& curve, double coeff) {
  return {curve.steps, smooth(curve.values, coeff), curve.seed_id};
}

ScoreReport score(std::span<const LearningCurve> curves, std::size_t window, double coeff) {
  if (curves.empty()) throw UsageError("score: no curves");
  if (window == 0) throw UsageError("score: window must be positive");
  const auto& steps = curves.front().steps;
  for (const auto& c : curves) {
    if (c.steps != steps || c.values.size() != steps.size()) {
      throw UsageError("score: curve '" + c.seed_id + "' is not aligned with '" +
                       curves.front().seed_id + "'");
    }
  }
  std::vector<std::vector<double>> smoothed;
  for (const auto& c : curves) smoothed.push_back(smooth(c.values, coeff));

  const std::size_t n = curves.size();
  const std::size_t len = steps.size();
  const std::size_t w = std::min(window, len);
  double t_crit = 0.0;
  if (n > 1) {
    boost::math::students_t dist(static_cast<double>(n - 1));
    t_crit = boost::math::quantile(boost::math::complement(dist, 0.025));
  }

  double mean_acc = 0.0;
  double std_acc = 0.0;
  for (std::size_t t = len - w; t < len; ++t) {
    double m = 0.0;
    for (const auto& s : smoothed) m += s[t];
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : smoothed) ss += (s[t] - m) * (s[t] - m);
    mean_acc += m;
    std_acc += n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  }
  ScoreReport r;
  r.mean = mean_acc / static_cast<double>(w);
  const double sd = std_acc / static_cast<double>(w);
  r.two_std = 2.0 * sd;
  r.ci95 = n > 1 ? t_crit * sd / std::sqrt(static_cast<double>(n)) : 0.0;
  r.n_seeds = n;
  r.window = w;
  return r;
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

namespace {

// Linear interpolation between order statistics.
double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Histogram advantage_histogram(std::span<const double> advantages, int bins) {
  if (bins < 1) throw UsageError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  std::vector<double> sorted;
  for (double a : advantages) {
    if (std::isfinite(a)) sorted.push_back(a);
  }
  std::sort(sorted.begin(), sorted.end());
  double r = 0.0;
  if (!sorted.empty()) {
    r = std::max(std::abs(percentile(sorted, 1.0)), std::abs(percentile(sorted, 99.0)));
  }
  if (!(r > 0.0)) r = 1.0;
  h.range = r;

  const double width = 2.0 * r / bins;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = -r + width * i;
  h.edges.back() = r;
  if (!sorted.empty()) {
    h.edges.front() = std::min(h.edges.front(), sorted.front());
    h.edges.back() = std::max(h.edges.back(), sorted.back());
  }
  for (double a : sorted) {
    const double pos = std::floor((a + r) / width);
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
  }
  return h;
}

Histogram advantage_histogram(const AfbcAgent& agent, const Batch& probe, Rng& rng, int bins) {
  return advantage_histogram(agent.advantages(probe, rng), bins);
}

}  // namespace afbc
