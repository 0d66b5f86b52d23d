#include <array>
#include <cmath>
#include <numbers>

#include "afbc/errors.hpp"
#include "afbc/numkit/adam.hpp"
#include "afbc/policy.hpp"
#include "doctest.h"

using namespace afbc;
using numkit::MlpNet;

namespace {

// Trunk whose output ignores the state: [mean; log_std] comes from the bias.
SquashedGaussianPolicy constant_policy(int state_dim, const Vector& mean, const Vector& log_std) {
  const int d = static_cast<int>(mean.size());
  MlpNet trunk({state_dim, 4, 2 * d});
  trunk.output_layer().bias << mean, log_std;
  return SquashedGaussianPolicy(trunk);
}

// Midpoint rule on (-1, 1) with n cells.
double integrate_1d(const SquashedGaussianPolicy& policy, const Vector& state, int n) {
  Matrix states = state.replicate(1, n);
  Matrix actions(1, n);
  const double h = 2.0 / n;
  for (int i = 0; i < n; ++i) actions(0, i) = -1.0 + (i + 0.5) * h;
  double sum = 0.0;
  for (double lp : policy.log_probs(states, actions)) sum += std::exp(lp);
  return sum * h;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("vanishing variance samples the squashed mean") {
    Vector mean(2), log_std(2);
    mean << 0.0, 0.4;
    log_std << -20.0, -20.0;  // clamped to the floor
    const auto policy = constant_policy(3, mean, log_std);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const auto s = policy.sample_action(Vector::Zero(3), rng);
      CHECK(std::abs(s.action(0) - 0.0) < 1e-3);
      CHECK(std::abs(s.action(1) - std::tanh(0.4)) < 1e-3);
    }
  }

  TEST_CASE("samples lie strictly inside the action box") {
    Rng rng(2);
    auto policy = SquashedGaussianPolicy::create(3, 2, {16}, rng);
    Vector log_std = Vector::Constant(2, 2.0);
    Vector mean = Vector::Constant(2, 3.0);
    const auto wide = constant_policy(3, mean, log_std);
    for (int i = 0; i < 2000; ++i) {
      Vector s = Vector::Random(3);
      for (const SquashedGaussianPolicy* p : std::array<const SquashedGaussianPolicy*, 2>{&policy, &wide}) {
        const auto smp = p->sample_action(s, rng);
        CHECK(smp.action.cwiseAbs().maxCoeff() < 1.0);
        CHECK(std::isfinite(smp.log_prob));
      }
    }
  }

  TEST_CASE("standard normal log-prob at the origin") {
    const auto policy = constant_policy(1, Vector::Zero(1), Vector::Zero(1));
    const double gaussian = -0.5 * std::log(2.0 * std::numbers::pi);
    // The squash Jacobian at 0 contributes -log(1 + squash_eps).
    const double expected = gaussian - std::log1p(policy.config().squash_eps);
    CHECK(policy.log_prob(Vector::Zero(1), Vector::Zero(1)) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-0.9189).epsilon(1e-4));
  }

  TEST_CASE("mean action") {
    Rng rng(3);
    SquashedGaussianPolicy zero(MlpNet({4, 8, 4}));
    CHECK(zero.mean_action(Vector::Random(4)).isZero(0.0));

    auto policy = SquashedGaussianPolicy::create(4, 2, {8, 8}, rng);
    const Vector s = Vector::Random(4);
    CHECK(policy.mean_action(s) == policy.mean_action(s));

    const auto one = constant_policy(2, Vector::Constant(1, 1.0), Vector::Zero(1));
    CHECK(one.mean_action(Vector::Zero(2))(0) == doctest::Approx(0.7616).epsilon(1e-4));
  }

  TEST_CASE("log_std is clamped to its range") {
    Vector mean = Vector::Zero(1);
    const auto high = constant_policy(1, mean, Vector::Constant(1, 9.0));
    const auto at_max = constant_policy(1, mean, Vector::Constant(1, 2.0));
    const Vector a = Vector::Constant(1, 0.3);
    CHECK(high.log_prob(Vector::Zero(1), a) == at_max.log_prob(Vector::Zero(1), a));
  }

  TEST_CASE("log-prob stays finite and clipped on the whole closed interval") {
    const auto sharp = constant_policy(1, Vector::Constant(1, 0.5), Vector::Constant(1, -10.0));
    for (double a : {-1.0, -0.999999, -0.5, 0.0, 0.46, 0.999999, 1.0}) {
      const double lp = sharp.log_prob(Vector::Zero(1), Vector::Constant(1, a));
      CHECK(std::isfinite(lp));
      CHECK(lp > -1000.0);
      CHECK(lp < 1000.0);
    }
    // Far from the point mass the unclipped log density is around -1e10.
    CHECK(sharp.log_prob(Vector::Zero(1), Vector::Constant(1, -1.0)) ==
          doctest::Approx(-1000.0).epsilon(1e-12));
  }

  TEST_CASE("foreign actions outside the box are rejected") {
    const auto policy = constant_policy(1, Vector::Zero(1), Vector::Zero(1));
    CHECK_THROWS_AS(policy.log_prob(Vector::Zero(1), Vector::Constant(1, 1.01)), DataError);
    CHECK_NOTHROW(policy.log_prob(Vector::Zero(1), Vector::Constant(1, 1.0 + 5e-7)));
  }

  TEST_CASE("implied density integrates to one in 1-D") {
    Rng rng(4);
    for (int trial = 0; trial < 8; ++trial) {
      const double mu = 2.0 * uniform01(rng) - 1.0;
      const double ls = -1.0 + 1.5 * uniform01(rng);
      const auto policy = constant_policy(2, Vector::Constant(1, mu), Vector::Constant(1, ls));
      INFO("mean " << mu << " log_std " << ls);
      CHECK(integrate_1d(policy, Vector::Zero(2), 200000) == doctest::Approx(1.0).epsilon(1e-2));
    }
    // Random trunk, random state.
    auto random = SquashedGaussianPolicy::create(3, 1, {8}, rng);
    CHECK(integrate_1d(random, Vector::Random(3), 200000) == doctest::Approx(1.0).epsilon(1e-2));
  }

  TEST_CASE("implied density integrates to one in 2-D") {
    Vector mean(2), log_std(2);
    mean << 0.3, -0.6;
    log_std << -0.5, 0.2;
    const auto policy = constant_policy(1, mean, log_std);
    const int n = 800;
    const double h = 2.0 / n;
    Matrix states = Matrix::Zero(1, n);
    Matrix actions(2, n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        actions(0, j) = -1.0 + (i + 0.5) * h;
        actions(1, j) = -1.0 + (j + 0.5) * h;
      }
      for (double lp : policy.log_probs(states, actions)) sum += std::exp(lp);
    }
    CHECK(sum * h * h == doctest::Approx(1.0).epsilon(1e-2));
  }

  TEST_CASE("NLL gradient matches finite differences") {
    Rng rng(5);
    auto policy = SquashedGaussianPolicy::create(3, 2, {6}, rng);
    Matrix s(3, 4), a(2, 4);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = standard_normal(rng);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 1.6 * uniform01(rng) - 0.8;
    const std::vector<double> w{1.0, 0.5, 0.0, 2.0};
    numkit::GradTape tape(policy.trunk());
    policy.weighted_nll_backward(s, a, w, tape);
    const auto analytic = tape.flat();

    auto loss = [&] {
      const auto lp = policy.log_probs(s, a);
      double l = 0.0;
      for (std::size_t i = 0; i < lp.size(); ++i) l -= w[i] * lp[i];
      return l / 4.0;
    };
    auto params = policy.trunk().flat_parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double saved = params[p];
      params[p] = saved + 1e-5;
      policy.trunk().set_flat_parameters(params);
      const double up = loss();
      params[p] = saved - 1e-5;
      policy.trunk().set_flat_parameters(params);
      const double down = loss();
      params[p] = saved;
      policy.trunk().set_flat_parameters(params);
      const double fd = (up - down) / 2e-5;
      const double denom = std::max({std::abs(fd), std::abs(analytic[p]), 1e-6});
      INFO("param " << p);
      CHECK(std::abs(fd - analytic[p]) / denom < 1e-4);
    }
  }

  TEST_CASE("actions at the mean with tiny std sit at the likelihood fixed point") {
    Rng rng(6);
    const Vector mean = Vector::Constant(1, 0.2);
    auto policy = constant_policy(2, mean, Vector::Constant(1, -12.0));
    Matrix s = Matrix::Zero(2, 8);
    Matrix a = Matrix::Constant(1, 8, std::tanh(0.2));
    numkit::GradTape tape(policy.trunk());
    const std::vector<double> w(8, 1.0);
    policy.weighted_nll_backward(s, a, w, tape);
    // The mean gradient vanishes; log_std is below its clamp and gets none.
    for (double g : tape.flat()) CHECK(std::abs(g) < 1e-6);
  }
}
