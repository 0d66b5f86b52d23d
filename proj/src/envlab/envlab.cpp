#include "afbc/envlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "afbc/errors.hpp"

namespace afbc {

Vector Env::clamp_action(const Vector& action) {
  if (action.size() != spec().action_dim) {
    throw ConfigError("action width does not match " + spec().id);
  }
  Vector clamped = action.cwiseMax(-1.0).cwiseMin(1.0);
  if (!action.allFinite()) throw NumericError("non-finite action passed to " + spec().id);
  if (clamped != action) ++clamped_;
  return clamped;
}

// ---------------------------------------------------------------- Mountain Car

MountainCar1D::MountainCar1D(MountainCarConfig config) : config_(config) {
  if (config_.max_episode_steps <= 0) throw ConfigError("max_episode_steps must be positive");
  if (!(config_.min_position < config_.goal_position &&
        config_.goal_position <= config_.max_position)) {
    throw ConfigError("mountain car goal must lie inside the track");
  }
  spec_.id = "mountain_car_1d";
  spec_.state_dim = 1;
  spec_.action_dim = 1;
  spec_.max_episode_steps = config_.max_episode_steps;
  spec_.return_low = -config_.fuel_coef * config_.max_episode_steps;
  spec_.return_high = config_.goal_reward;
}

Vector MountainCar1D::observe(double position, double velocity) const {
  const double frac =
      (position - config_.min_position) / (config_.max_position - config_.min_position);
  Vector obs(1);
  obs(0) = velocity >= 0.0 ? frac : -frac;
  return obs;
}

double MountainCar1D::valley_position() const { return -std::numbers::pi / 6.0; }

Vector MountainCar1D::reset(Rng& rng) {
  std::uniform_real_distribution<double> start(config_.start_low, config_.start_high);
  position_ = start(rng);
  velocity_ = 0.0;
  steps_ = 0;
  return observe(position_, velocity_);
}

void MountainCar1D::set_state(double position, double velocity) {
  position_ = std::clamp(position, config_.min_position, config_.max_position);
  velocity_ = std::clamp(velocity, -config_.max_speed, config_.max_speed);
}

Vector MountainCar1D::physical_state() const {
  Vector s(2);
  s << position_, velocity_;
  return s;
}

StepResult MountainCar1D::step(const Vector& action) {
  const double a = clamp_action(action)(0);
  velocity_ += a * config_.power - config_.gravity * std::cos(3.0 * position_);
  velocity_ = std::clamp(velocity_, -config_.max_speed, config_.max_speed);
  position_ += velocity_;
  if (position_ < config_.min_position) {
    position_ = config_.min_position;
    velocity_ = std::max(velocity_, 0.0);
  }
  position_ = std::min(position_, config_.max_position);
  ++steps_;

  StepResult r;
  r.reward = -config_.fuel_coef * a * a;
  r.terminal = position_ >= config_.goal_position;
  if (r.terminal) r.reward += config_.goal_reward;
  r.truncated = !r.terminal && steps_ >= config_.max_episode_steps;
  r.observation = observe(position_, velocity_);
  return r;
}

std::unique_ptr<Env> MountainCar1D::clone() const { return std::make_unique<MountainCar1D>(*this); }

// ------------------------------------------------------------------- Pendulum

PendulumSwingUp::PendulumSwingUp(PendulumConfig config) : config_(config) {
  if (config_.max_episode_steps <= 0) throw ConfigError("max_episode_steps must be positive");
  spec_.id = "pendulum_swingup";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.max_episode_steps = config_.max_episode_steps;
  spec_.return_low = 0.0;
  spec_.return_high = config_.max_return;
}

namespace {
double wrap_angle(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x + std::numbers::pi, two_pi);
  if (x < 0.0) x += two_pi;
  return x - std::numbers::pi;
}
}  // namespace

Vector PendulumSwingUp::observe() const {
  Vector obs(3);
  obs << std::cos(angle_), std::sin(angle_), speed_;
  return obs;
}

Vector PendulumSwingUp::reset(Rng& rng) {
  std::uniform_real_distribution<double> angle(-config_.start_angle_noise,
                                               config_.start_angle_noise);
  std::uniform_real_distribution<double> speed(-config_.start_speed_noise,
                                               config_.start_speed_noise);
  angle_ = wrap_angle(std::numbers::pi + angle(rng));
  speed_ = speed(rng);
  steps_ = 0;
  return observe();
}

void PendulumSwingUp::set_state(double angle, double speed) {
  angle_ = wrap_angle(angle);
  speed_ = std::clamp(speed, -config_.max_speed, config_.max_speed);
}

Vector PendulumSwingUp::physical_state() const {
  Vector s(2);
  s << angle_, speed_;
  return s;
}

StepResult PendulumSwingUp::step(const Vector& action) {
  const double a = clamp_action(action)(0);
  const double accel = config_.gravity_coef * std::sin(angle_) + config_.torque_coef * a;
  speed_ = std::clamp(speed_ + accel * config_.dt, -config_.max_speed, config_.max_speed);
  angle_ = wrap_angle(angle_ + speed_ * config_.dt);
  ++steps_;

  StepResult r;
  const double upright = 0.5 * (1.0 + std::cos(angle_));
  const double per_step = config_.max_return / config_.max_episode_steps;
  r.reward = per_step * upright * upright * (1.0 - config_.torque_penalty * a * a);
  r.truncated = steps_ >= config_.max_episode_steps;
  r.observation = observe();
  return r;
}

std::unique_ptr<Env> PendulumSwingUp::clone() const {
  return std::make_unique<PendulumSwingUp>(*this);
}

// -------------------------------------------------------------------- helpers

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "mountain_car_1d") return std::make_unique<MountainCar1D>();
  if (id == "pendulum_swingup") return std::make_unique<PendulumSwingUp>();
  throw ConfigError("unknown environment id '" + id +
                    "' (expected mountain_car_1d or pendulum_swingup)");
}

bool worst_case_label(const Env& env, const Vector& physical_state, const Vector& action) {
  const auto* car = dynamic_cast<const MountainCar1D*>(&env);
  if (car == nullptr) {
    throw UsageError("worst_case_label is only defined for mountain_car_1d, not " + env.spec().id);
  }
  constexpr double kMinSpeed = 1e-4;
  constexpr double kMinPush = 0.1;
  const double position = physical_state(0);
  const double velocity = physical_state(1);
  const double a = action(0);
  if (std::abs(velocity) < kMinSpeed || std::abs(a) < kMinPush) return false;
  const bool climbing = (position - car->valley_position()) * velocity > 0.0;
  const bool reversing = a * velocity < 0.0;
  return climbing && reversing;
}

Vector mountain_car_expert_action(const Vector& observation) {
  // Push along the direction of travel; the observation's sign is that direction.
  Vector a(1);
  a(0) = observation(0) >= 0.0 ? std::tanh(2.5) : -std::tanh(2.5);
  return a;
}

Vector pendulum_expert_action(const Vector& observation, const PendulumConfig& config) {
  const double cos_t = observation(0);
  const double angle = std::atan2(observation(1), cos_t);
  const double speed = observation(2);
  Vector a(1);
  if (cos_t > 0.85) {
    a(0) = std::clamp(-(8.0 * angle + 1.5 * speed), -1.0, 1.0);
    return a;
  }
  // Energy pumping: E = 0 at upright rest, -2 * gravity_coef hanging at rest.
  const double energy = 0.5 * speed * speed + config.gravity_coef * (cos_t - 1.0);
  const double direction = speed >= 0.0 ? 1.0 : -1.0;
  a(0) = std::clamp(-0.5 * energy * direction, -1.0, 1.0);
  return a;
}

}  // namespace afbc
