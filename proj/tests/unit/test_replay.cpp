#include <cmath>
#include <memory>
#include <numeric>

#include "afbc/errors.hpp"
#include "afbc/replay.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace afbc;

namespace {

std::shared_ptr<Dataset> indexed_dataset(std::size_t n) {
  auto d = std::make_shared<Dataset>(1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    d->push_back({Vector::Constant(1, static_cast<double>(i)), Vector::Zero(1), 0.0,
                  Vector::Zero(1), false});
  }
  return d;
}

}  // namespace

TEST_SUITE("replay") {
  TEST_CASE("alpha 0 makes every leaf 1") {
    PriorityTree tree(5, 0.0);
    for (std::size_t i = 0; i < 5; ++i) tree.set_priority(i, 0.5 + 7.0 * i);
    for (std::size_t i = 0; i < 5; ++i) CHECK(tree.leaf(i) == 1.0);
    CHECK(tree.total() == 5.0);
  }

  TEST_CASE("leaves 1..4 with alpha 1 total 10 and cumulative search") {
    PriorityTree tree(4, 1.0);
    for (std::size_t i = 0; i < 4; ++i) tree.set_priority(i, static_cast<double>(i + 1));
    CHECK(tree.total() == 10.0);
    // Cumulative bounds 1, 3, 6, 10.
    CHECK(tree.sample_prefix(5.5) == 2);
    CHECK(tree.sample_prefix(0.0) == 0);
    CHECK(tree.sample_prefix(0.999) == 0);
    CHECK(tree.sample_prefix(1.0) == 1);
    CHECK(tree.sample_prefix(2.999) == 1);
    CHECK(tree.sample_prefix(6.0) == 3);
    CHECK(tree.sample_prefix(9.999) == 3);
  }

  TEST_CASE("single leaf always wins") {
    PriorityTree tree(1, 0.6);
    tree.set_priority(0, 3.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(tree.sample_prefix(uniform01(rng) * tree.total()) == 0);
  }

  TEST_CASE("padding leaves are never sampled") {
    PriorityTree tree(5, 1.0);
    CHECK(tree.capacity() == 8);
    CHECK(tree.sample_prefix(tree.total()) == 4);
    CHECK(tree.sample_prefix(1e9) == 4);
  }

  TEST_CASE("tree misuse") {
    PriorityTree tree(3, 1.0);
    CHECK_THROWS_AS(tree.set_priority(3, 1.0), UsageError);
    CHECK_THROWS_AS(tree.set_priority(0, -1.0), UsageError);
    CHECK_THROWS_AS(tree.set_priority(0, std::nan("")), UsageError);
    PriorityTree empty(0, 1.0);
    CHECK_THROWS_AS(empty.sample_prefix(0.0), UsageError);
    CHECK_THROWS_AS(PriorityTree(3, 1.5), ConfigError);
    CHECK_THROWS_AS(PriorityTree(3, 0.5, 0.0), ConfigError);
  }

  TEST_CASE("sum tree agrees with a linear scan") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto r = oracle::sum_tree_check(seed, 20000);
      CHECK(r.sample_mismatches == 0);
      CHECK(r.max_rel_sum_error < 1e-9);
    }
  }

  TEST_CASE("raw priority schemes") {
    PrioritySchemeConfig clipped{PriorityScheme::kClippedAdvantage, 1e-3};
    PrioritySchemeConfig binary{PriorityScheme::kBinary, 1e-3};
    CHECK(raw_priority(clipped, 0.2) == 0.2);
    CHECK(raw_priority(clipped, -0.5) == 1e-3);
    CHECK(raw_priority(binary, 0.2) == doctest::Approx(1.001));
    CHECK(raw_priority(binary, -0.5) == doctest::Approx(0.001));
    CHECK(raw_priority(binary, 0.0) == doctest::Approx(1.001));
  }

  TEST_CASE("uniform sampling from an all-equal buffer") {
    auto d = std::make_shared<Dataset>(2, 1);
    const Transition t{Vector::Constant(2, 0.5), Vector::Constant(1, -0.2), 1.5,
                       Vector::Constant(2, 0.25), true};
    for (int i = 0; i < 10; ++i) d->push_back(t);
    ReplayBuffer buffer(d);
    Rng rng(2);
    const Batch b = buffer.sample_uniform(64, rng);
    CHECK(b.size() == 64);
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(b.states.col(static_cast<Eigen::Index>(i)) == t.s);
      CHECK(b.rewards(static_cast<Eigen::Index>(i)) == 1.5);
      CHECK(b.dones(static_cast<Eigen::Index>(i)) == 1.0);
    }
  }

  TEST_CASE("empty buffer cannot be sampled") {
    ReplayBuffer buffer(std::make_shared<Dataset>(1, 1));
    Rng rng(0);
    CHECK_THROWS_AS(buffer.sample_uniform(4, rng), UsageError);
    CHECK_THROWS_AS(buffer.sample_prioritized(4, rng), UsageError);
  }

  TEST_CASE("priorities (3, 1) with alpha 1 sample the first 75% of the time") {
    ReplayConfig cfg;
    cfg.alpha = 1.0;
    ReplayBuffer buffer(indexed_dataset(2), cfg);
    const std::size_t idx[] = {0, 1};
    const double adv[] = {3.0, 1.0};
    buffer.update_priorities(idx, adv);
    Rng rng(3);
    std::size_t first = 0;
    // Single-slot batches so stratification does not hide the variance.
    for (int i = 0; i < 100000; ++i) first += buffer.sample_prioritized(1, rng).indices[0] == 0;
    CHECK(std::abs(first / 1e5 - 0.75) < 0.02);
  }

  TEST_CASE("equal priorities are indistinguishable from uniform") {
    ReplayConfig cfg;
    cfg.alpha = 0.6;
    ReplayBuffer buffer(indexed_dataset(8), cfg);
    Rng rng(4);
    std::vector<std::size_t> counts(8, 0);
    for (int i = 0; i < 20000; ++i) {
      for (std::size_t k : buffer.sample_prioritized(8, rng).indices) ++counts[k];
    }
    // Chi-square with 7 degrees of freedom; 24.3 is the 0.1% tail.
    double chi2 = 0.0;
    for (std::size_t c : counts) chi2 += std::pow(static_cast<double>(c) - 20000.0, 2) / 20000.0;
    CHECK(chi2 < 24.3);
  }

  TEST_CASE("proportional sampling frequencies") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const double alpha = std::array{0.0, 0.6, 1.0}[seed];
      const auto r = oracle::proportional_sampling_check(seed, alpha, 200000);
      INFO("alpha " << alpha << " size " << r.size);
      CHECK(r.max_abs_error < 0.01);
    }
  }

  TEST_CASE("alpha 0 prioritized sampling reproduces uniform batches") {
    ReplayConfig cfg;
    cfg.alpha = 0.0;
    ReplayBuffer buffer(indexed_dataset(100), cfg);
    std::vector<std::size_t> idx(100);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> adv(100);
    for (std::size_t i = 0; i < 100; ++i) adv[i] = static_cast<double>(i);
    buffer.update_priorities(idx, adv);
    Rng a(9), b(9);
    for (int i = 0; i < 10; ++i) {
      CHECK(buffer.sample_prioritized(32, a).indices == buffer.sample_uniform(32, b).indices);
    }
  }

  TEST_CASE("non-finite advantages are skipped and counted") {
    ReplayConfig cfg;
    cfg.alpha = 1.0;
    ReplayBuffer buffer(indexed_dataset(3), cfg);
    const std::size_t idx[] = {0, 1, 2};
    const double adv[] = {2.0, std::nan(""), INFINITY};
    buffer.update_priorities(idx, adv);
    CHECK(buffer.skipped_updates() == 2);
    CHECK(buffer.tree().leaf(0) == 2.0);
    CHECK(buffer.tree().leaf(1) == 1.0);
  }

  TEST_CASE("batches carry transitions and indices only") {
    ReplayBuffer buffer(indexed_dataset(10));
    Rng rng(5);
    const Batch b = buffer.sample_prioritized(16, rng);
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(b.states(0, static_cast<Eigen::Index>(i)) == static_cast<double>(b.indices[i]));
    }
  }
}
