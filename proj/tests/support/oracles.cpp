#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "afbc/agents/filters.hpp"
#include "afbc/numkit/popart.hpp"

namespace afbc::oracle {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Loss used by the gradient check, with its analytic output gradient.
struct Loss {
  int kind = 0;  // 0: half squared error to targets, 1: weighted cubic
  Matrix targets;
  Matrix coeffs;

  double value(const Matrix& out) const {
    const double b = static_cast<double>(out.cols());
    if (kind == 0) return 0.5 * (out - targets).squaredNorm() / b;
    return (coeffs.array() * out.array().cube()).sum() / (3.0 * b) +
           (targets.array() * out.array()).sum() / b;
  }
  Matrix grad(const Matrix& out) const {
    const double b = static_cast<double>(out.cols());
    if (kind == 0) return (out - targets) / b;
    return ((coeffs.array() * out.array().square()) + targets.array()).matrix() / b;
  }
};

}  // namespace

GradientReport finite_difference_check(std::uint64_t seed) {
  Rng rng = make_stream(seed, "oracle_fd");
  std::vector<int> sizes{uniform_int(rng, 1, 5)};
  const int hidden_layers = uniform_int(rng, 1, 3);
  for (int l = 0; l < hidden_layers; ++l) sizes.push_back(uniform_int(rng, 2, 8));
  sizes.push_back(uniform_int(rng, 1, 3));
  numkit::MlpNet net = numkit::MlpNet::uniform_init(sizes, rng);
  // Non-zero biases keep hidden units away from the ReLU kink at the origin.
  for (auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.5 * standard_normal(rng);
  }

  const int batch = uniform_int(rng, 1, 4);
  Matrix x(sizes.front(), batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
  Loss loss;
  loss.kind = uniform_int(rng, 0, 1);
  loss.targets.resize(sizes.back(), batch);
  loss.coeffs.resize(sizes.back(), batch);
  for (Eigen::Index i = 0; i < loss.targets.size(); ++i) {
    loss.targets.data()[i] = standard_normal(rng);
    loss.coeffs.data()[i] = standard_normal(rng);
  }

  numkit::ForwardCache cache;
  const Matrix& out = net.forward(x, cache);
  numkit::GradTape tape(net);
  numkit::backward(net, cache, loss.grad(out), tape);
  const std::vector<double> analytic = tape.flat();

  const double h = 1e-5;
  std::vector<double> params = net.flat_parameters();
  GradientReport report;
  report.parameters = params.size();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = params[p];
    params[p] = saved + h;
    net.set_flat_parameters(params);
    const double up = loss.value(net.forward(x));
    params[p] = saved - h;
    net.set_flat_parameters(params);
    const double down = loss.value(net.forward(x));
    params[p] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[p]), std::abs(fd), 1e-6});
    const double rel = std::abs(analytic[p] - fd) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      std::ostringstream os;
      os << "param " << p << " analytic " << analytic[p] << " fd " << fd;
      report.worst = os.str();
    }
  }
  net.set_flat_parameters(params);
  return report;
}

LinearScanTree::LinearScanTree(std::size_t size, double alpha, double min_priority)
    : alpha_(alpha), min_priority_(min_priority), leaves_(size, 1.0) {}

void LinearScanTree::set_priority(std::size_t index, double raw) {
  leaves_.at(index) = std::pow(std::max(raw, min_priority_), alpha_);
}

double LinearScanTree::total() const { return range_sum(0, leaves_.size()); }

double LinearScanTree::range_sum(std::size_t begin, std::size_t end) const {
  end = std::min(end, leaves_.size());
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += leaves_[i];
  return s;
}

std::size_t LinearScanTree::sample_prefix(double u) const {
  double c = 0.0;
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    c += leaves_[i];
    if (u < c) return i;
  }
  return leaves_.size() - 1;
}

TreeReport sum_tree_check(std::uint64_t seed, std::size_t operations) {
  Rng rng = make_stream(seed, "oracle_tree");
  const std::size_t size = static_cast<std::size_t>(uniform_int(rng, 1, 3000));
  const double alphas[] = {0.0, 0.6, 1.0};
  const double alpha = alphas[seed % 3];
  const double eps = 1e-3;
  PriorityTree tree(size, alpha, eps);
  LinearScanTree lin(size, alpha, eps);
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);

  auto random_raw = [&] {
    const double r = uniform01(rng);
    if (r < 0.1) return 0.0;
    return std::exp(4.0 * standard_normal(rng));
  };

  TreeReport report;
  auto rel = [](double a, double b) {
    const double d = std::max(std::abs(b), 1e-300);
    return std::abs(a - b) / d;
  };
  auto check_nodes = [&] {
    const std::size_t cap = tree.capacity();
    for (std::size_t k = 1; k < 2 * cap; ++k) {
      const int level = std::bit_width(k) - 1;
      const std::size_t span = cap >> level;
      const std::size_t begin = (k - (std::size_t{1} << level)) * span;
      const double expected = lin.range_sum(begin, begin + span);
      const double err = expected == 0.0 ? std::abs(tree.node(k)) : rel(tree.node(k), expected);
      report.max_rel_sum_error = std::max(report.max_rel_sum_error, err);
    }
  };

  for (std::size_t op = 0; op < operations; ++op) {
    switch (uniform_int(rng, 0, 2)) {
      case 0: {
        const std::size_t i = pick(rng);
        const double raw = random_raw();
        tree.set_priority(i, raw);
        lin.set_priority(i, raw);
        break;
      }
      case 1: {
        const double u = uniform01(rng) * lin.total();
        if (tree.sample_prefix(u) != lin.sample_prefix(u)) ++report.sample_mismatches;
        break;
      }
      default: {
        // Batch update through advantages, as the trainer does.
        const int n = uniform_int(rng, 1, 16);
        for (int j = 0; j < n; ++j) {
          const std::size_t i = pick(rng);
          const double adv = 3.0 * standard_normal(rng);
          tree.set_priority(i, std::max(adv, eps));
          lin.set_priority(i, adv > eps ? adv : eps);
        }
        break;
      }
    }
    report.max_rel_sum_error = std::max(report.max_rel_sum_error, rel(tree.total(), lin.total()));
    if (op % 1000 == 999) check_nodes();
    ++report.operations;
  }
  check_nodes();
  return report;
}

FrequencyReport proportional_sampling_check(std::uint64_t seed, double alpha, std::size_t draws) {
  Rng rng = make_stream(seed, "oracle_freq");
  const std::size_t size = static_cast<std::size_t>(uniform_int(rng, 2, 40));
  auto data = std::make_shared<Dataset>(1, 1);
  for (std::size_t i = 0; i < size; ++i) {
    Transition t{Vector::Constant(1, static_cast<double>(i)), Vector::Zero(1), 0.0,
                 Vector::Zero(1), false};
    data->push_back(t);
  }
  ReplayConfig config;
  config.alpha = alpha;
  ReplayBuffer buffer(data, config);
  std::vector<double> raw(size);
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  // Spans priorities over two decades, all above epsilon.
  for (auto& p : raw) p = 0.05 + 5.0 * uniform01(rng) * uniform01(rng);
  buffer.update_priorities(idx, raw);

  std::vector<double> expected(size);
  double z = 0.0;
  for (std::size_t i = 0; i < size; ++i) z += expected[i] = std::pow(raw[i], alpha);
  for (auto& e : expected) e /= z;

  std::vector<std::size_t> counts(size, 0);
  const std::size_t batch = 1000;
  std::size_t done = 0;
  while (done < draws) {
    const std::size_t b = std::min(batch, draws - done);
    for (std::size_t i : buffer.sample_prioritized(b, rng).indices) ++counts[i];
    done += b;
  }
  FrequencyReport report{alpha, size, 0.0};
  for (std::size_t i = 0; i < size; ++i) {
    const double f = static_cast<double>(counts[i]) / static_cast<double>(draws);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(f - expected[i]));
  }
  return report;
}

double popart_preservation_error(std::uint64_t seed, int updates, int probes) {
  Rng rng = make_stream(seed, "oracle_popart");
  numkit::MlpNet net = numkit::MlpNet::uniform_init({3, 16, 16, 1}, rng);
  numkit::MlpNet twin = numkit::MlpNet::uniform_init({3, 8, 1}, rng);
  numkit::PopArtStats stats;
  Matrix x(3, probes);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
  auto denorm = [&](const numkit::MlpNet& n) {
    Matrix out = n.forward(x);
    return ((out.array() * stats.sigma()) + stats.mu()).matrix().eval();
  };
  const Matrix before = denorm(net);
  const Matrix before_twin = denorm(twin);

  std::vector<numkit::MlpNet*> heads{&net, &twin};
  std::vector<double> targets(32);
  double worst = 0.0;
  for (int u = 0; u < updates; ++u) {
    // Drifting target distribution with occasional scale jumps.
    const double center = 50.0 * std::sin(0.01 * u) + 0.1 * u;
    const double spread = (u / 100) % 2 == 0 ? 0.5 : 40.0;
    for (auto& t : targets) t = center + spread * standard_normal(rng);
    numkit::popart_update(stats, heads, targets);
    for (const auto& [n, ref] : {std::pair{&net, &before}, std::pair{&twin, &before_twin}}) {
      const Matrix now = denorm(*n);
      for (Eigen::Index i = 0; i < now.size(); ++i) {
        const double rel = std::abs(now.data()[i] - ref->data()[i]) /
                           std::max(std::abs(ref->data()[i]), 1e-12);
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

std::vector<Check> filter_examples() {
  std::vector<Check> checks;
  auto add = [&](std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };

  FilterConfig binary;
  binary.kind = FilterKind::kBinary;
  {
    const std::vector<double> adv{0.5, -0.3};
    const auto w = apply_filter(binary, adv);
    add("binary A=+0.5 -> 1", w[0] == 1.0, fmt(w[0]));
    add("binary A=-0.3 -> 0", w[1] == 0.0, fmt(w[1]));
  }

  FilterConfig expo;
  expo.kind = FilterKind::kExponential;
  {
    bool ok = true;
    for (double beta : {0.1, 1.0, 2.0, 7.5}) {
      expo.beta = beta;
      const std::vector<double> adv{0.0};
      ok = ok && apply_filter(expo, adv)[0] == 1.0;
    }
    add("exponential A=0 -> 1 for any beta", ok);
    expo.beta = 2.0;
    expo.clip_max = 20.0;
    const std::vector<double> adv{std::log(2.0) / 2.0};
    const double w = apply_filter(expo, adv)[0];
    add("exponential beta=2 A=ln2/2 -> 2", std::abs(w - 2.0) < 1e-12, fmt(w));
  }

  {
    const std::vector<double> d{0.3, -0.1, 0.2, 0.0};
    const std::vector<double> p{0.5, 0.4, 0.1, 0.9};
    add("t-test p=1.0 approves everything", ttest_approves(d, p, 1.0));
    const std::vector<double> same{0.7, 0.2, -0.4, 1.1, 0.3, 0.0, -0.2, 0.5};
    add("t-test identical samples not approved at p=0.05", !ttest_approves(same, same, 0.05));

    Rng rng = make_stream(0, "oracle_ttest");
    std::vector<double> ds(8), ps(8);
    for (auto& v : ds) v = 1.0 + 0.1 * standard_normal(rng);
    for (auto& v : ps) v = 0.1 * standard_normal(rng);
    const double pv = paired_ttest_pvalue(ds, ps);
    add("t-test N(1,0.1) vs N(0,0.1), k=8 approved at p=0.05", ttest_approves(ds, ps, 0.05),
        "p-value " + fmt(pv));
  }

  {
    Matrix same = Matrix::Constant(3, 4, 2.5);
    const auto w = uncertainty_weights(same, 1.0);
    bool uniform = true;
    for (double v : w) uniform = uniform && std::abs(v - 0.25) < 1e-15;
    add("identical members -> uniform weights", uniform);

    Matrix preds(3, 4);
    preds << 1.0, 2.0, 3.0, 4.0,  //
        1.0, 2.0, 3.0, 4.0,       //
        1.0, 2.0, 3.0, 4.0;
    Vector y(4);
    y << 0.0, 1.0, 1.0, 6.0;
    double mean_loss = 0.0;
    for (int b = 0; b < 4; ++b) mean_loss += 0.5 * 3.0 * std::pow(preds(0, b) - y(b), 2) / 4.0;
    const double got = weighted_critic_loss(preds, y, uncertainty_weights(preds, 1.0));
    add("identical members -> mean loss / batch size", std::abs(got - mean_loss / 4.0) < 1e-12,
        fmt(got) + " vs " + fmt(mean_loss / 4.0));

    Matrix spread(2, 3);
    spread << 0.0, 0.0, 0.0,  //
        1.0, 5.0, 10.0;
    const auto w0 = uncertainty_weights(spread, 0.0);
    bool flat = true;
    for (double v : w0) flat = flat && std::abs(v - 1.0 / 3.0) < 1e-15;
    add("tau=0 -> uniform weights", flat);

    // Sample std of (0, sqrt 2) is 1 and of (0, 2 sqrt 2) is 2.
    Matrix two(2, 2);
    two << 0.0, 0.0,  //
        std::sqrt(2.0), 2.0 * std::sqrt(2.0);
    const auto w2 = uncertainty_weights(two, 1.0);
    const double e1 = std::exp(1.0), e2 = std::exp(2.0);
    add("stds (1,2), tau=1 -> (e/(e+e^2), e^2/(e+e^2))",
        std::abs(w2[0] - e1 / (e1 + e2)) < 1e-12 && std::abs(w2[1] - e2 / (e1 + e2)) < 1e-12 &&
            std::abs(w2[0] - 0.269) < 5e-4 && std::abs(w2[1] - 0.731) < 5e-4,
        fmt(w2[0]) + ", " + fmt(w2[1]));
  }
  return checks;
}

std::pair<double, double> chain_dp(double r0, double r1, double gamma) {
  // V(terminal) = 0; iterate the Bellman operator to its fixed point.
  double q0 = 0.0, q1 = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const double n1 = r1;
    const double n0 = r0 + gamma * q1;
    if (n0 == q0 && n1 == q1) break;
    q0 = n0;
    q1 = n1;
  }
  return {q0, q1};
}

ChainReport bellman_chain_check(std::uint64_t seed, int steps) {
  const double r0 = 1.0, r1 = 2.0, gamma = 0.99;
  AgentConfig cfg;
  cfg.hidden = {32, 32};
  cfg.critic_lr = 1e-3;
  cfg.tau_polyak = 0.05;
  cfg.target_delay = 1;
  cfg.gamma = gamma;
  Rng init = make_stream(seed, "init");
  AfbcAgent agent(1, 1, cfg, init);

  Dataset data(1, 1);
  Rng act = make_stream(seed, "chain_actions");
  for (int i = 0; i < 32; ++i) {
    const double a = 1.8 * uniform01(act) - 0.9;
    data.push_back({Vector::Constant(1, 0.0), Vector::Constant(1, a), r0,
                    Vector::Constant(1, 1.0), false});
    const double b = 1.8 * uniform01(act) - 0.9;
    data.push_back({Vector::Constant(1, 1.0), Vector::Constant(1, b), r1,
                    Vector::Constant(1, 1.0), true});
  }
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const Batch batch = data.gather(all);
  Rng rng = make_stream(seed, "critic_noise");
  for (int s = 0; s < steps; ++s) agent.critic_update(batch, rng);

  const auto [dp0, dp1] = chain_dp(r0, r1, gamma);
  ChainReport report;
  report.dp_q0 = dp0;
  report.dp_q1 = dp1;
  const int probes = 9;
  Matrix states(1, 2 * probes), actions(1, 2 * probes);
  for (int i = 0; i < probes; ++i) {
    const double a = -0.9 + 1.8 * i / (probes - 1);
    states(0, i) = 0.0;
    states(0, probes + i) = 1.0;
    actions(0, i) = actions(0, probes + i) = a;
  }
  const Matrix q = agent.critic_values(states, actions);
  for (Eigen::Index m = 0; m < q.rows(); ++m) {
    for (int i = 0; i < probes; ++i) {
      report.max_error = std::max(report.max_error, std::abs(q(m, i) - dp0));
      report.max_error = std::max(report.max_error, std::abs(q(m, probes + i) - dp1));
    }
  }
  report.q0 = q.leftCols(probes).mean();
  report.q1 = q.rightCols(probes).mean();
  return report;
}

}  // namespace afbc::oracle
