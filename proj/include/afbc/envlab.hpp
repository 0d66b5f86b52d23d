#ifndef AFBC_ENVLAB_HPP
#define AFBC_ENVLAB_HPP

#include <cstdint>
#include <memory>
#include <string>

#include "afbc/numkit/mlp.hpp"
#include "afbc/rng.hpp"

namespace afbc {

using numkit::Vector;

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  int max_episode_steps = 1000;
  double return_low = 0.0;  // range used for performance tiering
  double return_high = 1000.0;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;   // true termination: no bootstrapping past this step
  bool truncated = false;  // episode cap reached
  bool done() const { return terminal || truncated; }
};

/// Continuous-control task with actions in [-1, 1]^action_dim.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Vector reset(Rng& rng) = 0;
  // Out-of-range actions are clamped and counted.
  virtual StepResult step(const Vector& action) = 0;
  // Underlying simulator state (not the observation).
  virtual Vector physical_state() const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  int elapsed_steps() const { return steps_; }
  std::uint64_t clamped_actions() const { return clamped_; }

 protected:
  Vector clamp_action(const Vector& action);

  int steps_ = 0;
  std::uint64_t clamped_ = 0;
};

struct MountainCarConfig {
  double min_position = -1.2;
  double max_position = 0.6;
  double goal_position = 0.45;
  double max_speed = 0.07;
  double power = 0.0015;
  double gravity = 0.0025;
  double fuel_coef = 0.1;
  double goal_reward = 100.0;
  double start_low = -0.6;
  double start_high = -0.4;
  int max_episode_steps = 300;
};

/// Continuous Mountain Car whose observation is a single scalar carrying the
/// position and the direction of travel:
///   obs = sign(v) * (p - p_min) / (p_max - p_min),  sign(0) = +1.
class MountainCar1D final : public Env {
 public:
  explicit MountainCar1D(MountainCarConfig config = {});

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  Vector physical_state() const override;
  std::unique_ptr<Env> clone() const override;

  const MountainCarConfig& config() const { return config_; }
  double position() const { return position_; }
  double velocity() const { return velocity_; }
  // Test hook: place the cart anywhere in the state space.
  void set_state(double position, double velocity);

  Vector observe(double position, double velocity) const;
  // Bottom of the valley, where the slope changes sign.
  double valley_position() const;

 private:
  MountainCarConfig config_;
  EnvSpec spec_;
  double position_ = 0.0;
  double velocity_ = 0.0;
};

struct PendulumConfig {
  double dt = 0.05;
  double max_speed = 8.0;
  double gravity_coef = 15.0;  // angular acceleration from gravity at horizontal
  double torque_coef = 9.0;    // angular acceleration at full action
  double torque_penalty = 0.1;
  double start_angle_noise = 0.2;
  double start_speed_noise = 0.2;
  int max_episode_steps = 200;
  double max_return = 1000.0;
};

/// Pendulum swing-up. theta = 0 is upright; episodes start hanging down.
/// Observation (cos theta, sin theta, theta_dot); per-step reward
///   (max_return / T) * ((1 + cos theta) / 2)^2 * (1 - torque_penalty * a^2),
/// which is non-negative and sums to at most max_return.
class PendulumSwingUp final : public Env {
 public:
  explicit PendulumSwingUp(PendulumConfig config = {});

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  Vector physical_state() const override;
  std::unique_ptr<Env> clone() const override;

  const PendulumConfig& config() const { return config_; }
  void set_state(double angle, double speed);

 private:
  Vector observe() const;

  PendulumConfig config_;
  EnvSpec spec_;
  double angle_ = 0.0;
  double speed_ = 0.0;
};

/// "mountain_car_1d" or "pendulum_swingup". Throws ConfigError otherwise.
std::unique_ptr<Env> make_env(const std::string& id);

/// Mountain-Car adversarial pattern: the cart is climbing away from the
/// valley bottom and the action deliberately pushes against its motion.
/// `physical_state` is (position, velocity). Throws UsageError for other envs.
bool worst_case_label(const Env& env, const Vector& physical_state, const Vector& action);

// Scripted controllers used as experts and as building blocks for graded
// data-collection policies. Both act on observations.
Vector mountain_car_expert_action(const Vector& observation);
Vector pendulum_expert_action(const Vector& observation, const PendulumConfig& config = {});

}  // namespace afbc

#endif  // AFBC_ENVLAB_HPP
