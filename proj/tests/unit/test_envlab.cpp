#include <cmath>
#include <numbers>

#include "afbc/datasets.hpp"
#include "afbc/envlab.hpp"
#include "afbc/errors.hpp"
#include "doctest.h"

using namespace afbc;

namespace {

Vector act(double a) { return Vector::Constant(1, a); }

// Runs one episode of a fixed-action or scripted policy; returns (return, reached goal).
template <typename Policy>
std::pair<double, bool> run_episode(Env& env, Rng& rng, Policy policy) {
  Vector obs = env.reset(rng);
  double ret = 0.0;
  for (;;) {
    const StepResult r = env.step(policy(obs));
    ret += r.reward;
    obs = r.observation;
    if (r.done()) return {ret, r.terminal};
  }
}

}  // namespace

TEST_SUITE("envlab") {
  TEST_CASE("Mountain Car reset lies in the encoding range and start interval") {
    MountainCar1D env;
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
      const Vector obs = env.reset(rng);
      REQUIRE(obs.size() == 1);
      CHECK(std::abs(obs(0)) <= 1.0);
      CHECK(env.position() >= env.config().start_low);
      CHECK(env.position() <= env.config().start_high);
      CHECK(env.velocity() == 0.0);
      CHECK(env.elapsed_steps() == 0);
    }
  }

  TEST_CASE("resets with the same seed agree") {
    for (const char* id : {"mountain_car_1d", "pendulum_swingup"}) {
      auto a = make_env(id);
      auto b = make_env(id);
      Rng r1(42), r2(42);
      CHECK(a->reset(r1) == b->reset(r2));
      CHECK(a->physical_state() == b->physical_state());
    }
  }

  TEST_CASE("same seed and action sequence give identical trajectories") {
    for (const char* id : {"mountain_car_1d", "pendulum_swingup"}) {
      auto a = make_env(id);
      auto b = make_env(id);
      Rng r1(3), r2(3), actions(4);
      a->reset(r1);
      b->reset(r2);
      for (int t = 0; t < 150; ++t) {
        const Vector u = act(2.0 * uniform01(actions) - 1.0);
        const StepResult x = a->step(u);
        const StepResult y = b->step(u);
        CHECK(x.observation == y.observation);
        CHECK(x.reward == y.reward);
        CHECK(x.done() == y.done());
        if (x.done()) break;
      }
    }
  }

  TEST_CASE("full push next to the goal terminates with the goal reward") {
    MountainCar1D env;
    env.set_state(0.449, 0.02);
    const StepResult r = env.step(act(1.0));
    CHECK(r.terminal);
    CHECK(r.done());
    CHECK(r.reward == doctest::Approx(100.0 - 0.1));
  }

  TEST_CASE("zero action at rest in the valley costs nothing and stays put") {
    MountainCar1D env;
    const double bottom = env.valley_position();
    CHECK(bottom == doctest::Approx(-std::numbers::pi / 6.0));
    env.set_state(bottom, 0.0);
    const StepResult r = env.step(act(0.0));
    CHECK(r.reward == 0.0);
    CHECK(std::abs(env.position() - bottom) < 1e-12);
    CHECK(!r.done());
  }

  TEST_CASE("pushing right alone fails, the momentum strategy succeeds") {
    MountainCar1D env;
    Rng rng(5);
    const auto [push_return, push_goal] = run_episode(env, rng, [](const Vector&) { return act(1.0); });
    CHECK_FALSE(push_goal);
    CHECK(push_return < 0.0);
    int successes = 0;
    for (int e = 0; e < 20; ++e) {
      const auto [ret, goal] =
          run_episode(env, rng, [](const Vector& o) { return mountain_car_expert_action(o); });
      successes += goal ? 1 : 0;
      CHECK(ret > 80.0);
    }
    CHECK(successes == 20);
  }

  TEST_CASE("episode return bounds") {
    MountainCar1D car;
    PendulumSwingUp pend;
    Rng rng(6);
    const double fuel_max = car.config().fuel_coef;
    for (int e = 0; e < 30; ++e) {
      const auto [cr, cg] = run_episode(car, rng, [&](const Vector&) { return act(2.0 * uniform01(rng) - 1.0); });
      CHECK(cr >= -car.config().max_episode_steps * fuel_max);
      CHECK(cr <= 100.0);
      const auto [pr, pg] = run_episode(pend, rng, [&](const Vector&) { return act(2.0 * uniform01(rng) - 1.0); });
      CHECK(pr >= pend.spec().return_low);
      CHECK(pr <= pend.spec().return_high);
      CHECK_FALSE(pg);
    }
  }

  TEST_CASE("compressed encoding keeps position and direction only") {
    MountainCar1D env;
    const Vector fwd = env.observe(-0.3, 0.01);
    const Vector fwd2 = env.observe(-0.3, 0.05);
    const Vector back = env.observe(-0.3, -0.01);
    CHECK(fwd == fwd2);
    CHECK(fwd != back);
    CHECK(fwd(0) == doctest::Approx((-0.3 + 1.2) / 1.8));
    CHECK(back(0) == doctest::Approx(-(-0.3 + 1.2) / 1.8));
    CHECK(env.observe(-0.3, 0.0)(0) > 0.0);
  }

  TEST_CASE("out-of-range actions are clamped and counted") {
    MountainCar1D a, b;
    a.set_state(-0.5, 0.0);
    b.set_state(-0.5, 0.0);
    const StepResult x = a.step(act(3.0));
    const StepResult y = b.step(act(1.0));
    CHECK(x.observation == y.observation);
    CHECK(a.clamped_actions() == 1);
    CHECK(b.clamped_actions() == 0);
  }

  TEST_CASE("worst-case labels") {
    MountainCar1D env;
    Vector climbing(2);
    climbing << 0.1, 0.02;  // right of the valley, moving right
    CHECK(worst_case_label(env, climbing, act(-1.0)));
    CHECK_FALSE(worst_case_label(env, climbing, act(1.0)));
    Vector rest(2);
    rest << -0.52, 0.0;
    CHECK_FALSE(worst_case_label(env, rest, act(0.0)));
    PendulumSwingUp pend;
    CHECK_THROWS_AS(worst_case_label(pend, climbing, act(-1.0)), UsageError);
  }

  TEST_CASE("random rollouts label between 5% and 50% as worst case") {
    MountainCar1D env;
    Rng rng(7);
    std::size_t labeled = 0, total = 0;
    while (total < 100000) {
      env.reset(rng);
      for (;;) {
        const Vector before = env.physical_state();
        const Vector a = act(2.0 * uniform01(rng) - 1.0);
        labeled += worst_case_label(env, before, a) ? 1 : 0;
        ++total;
        if (env.step(a).done() || total >= 100000) break;
      }
    }
    const double rate = static_cast<double>(labeled) / static_cast<double>(total);
    CHECK(rate > 0.05);
    CHECK(rate < 0.5);
  }

  TEST_CASE("pendulum random policy lands in the lowest tier, scripted expert in the top") {
    PendulumSwingUp env;
    Rng rng(8);
    double random_total = 0.0, expert_total = 0.0;
    for (int e = 0; e < 10; ++e) {
      random_total += run_episode(env, rng, [&](const Vector&) { return act(2.0 * uniform01(rng) - 1.0); }).first;
      expert_total += run_episode(env, rng, [&](const Vector& o) {
                        return pendulum_expert_action(o, env.config());
                      }).first;
    }
    CHECK(tier_for_return(random_total / 10, 0.0, 1000.0) == Tier::kVeryBad);
    CHECK(tier_for_return(expert_total / 10, 0.0, 1000.0) == Tier::kExpert);
  }

  TEST_CASE("pendulum observation and reward at the top") {
    PendulumSwingUp env;
    env.set_state(0.0, 0.0);
    const StepResult r = env.step(act(0.0));
    CHECK(r.observation(0) == doctest::Approx(1.0));
    CHECK(r.reward == doctest::Approx(1000.0 / 200.0).epsilon(1e-3));
  }

  TEST_CASE("unknown environment id") {
    CHECK_THROWS_AS(make_env("cartpole"), ConfigError);
  }
}
