#pragma once

// Built-in multi-reward toy environments. Each step emits the reward already
// decomposed into named components; the scalar reward of a baseline run is
// their sum. Episodes are fixed-horizon with no early termination, and the
// whole (observation, reward, done) trace is a pure function of
// (seed, episode_seed, action sequence).

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "ahrs/common.hpp"

namespace ahrs {

struct Observation {
  std::vector<double> values;
};

struct ActionVec {
  std::vector<double> values;
};

struct RewardVector {
  std::vector<double> components;
};

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int act_dim = 0;
  int num_components = 0;  // K
  std::vector<std::string> reward_names;
  std::vector<std::string> obs_field_names;
  int horizon = 0;
  double action_low = 0.0;
  double action_high = 0.0;
};

struct StepResult {
  Observation obs;
  RewardVector reward;
  bool done = false;
};

namespace detail {

constexpr double kDt = 0.05;

inline double wrap_angle(double theta) {
  // into [-pi, pi]
  theta = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (theta < 0) theta += 2.0 * M_PI;
  return theta - M_PI;
}

struct PointMassState {
  double pos[2] = {0, 0};
  double vel[2] = {0, 0};
  double goal[2] = {0, 0};
};

struct PendulumState {
  double theta = 0;
  double theta_dot = 0;
};

}  // namespace detail

class Env {
 public:
  static Env make(const std::string& name, std::uint64_t seed);

  const EnvSpec& spec() const { return spec_; }

  Observation reset(std::uint64_t episode_seed) {
    // State depends only on (seed, episode_seed), never on prior stepping.
    Rng rng(derive_seed(seed_, "episode", episode_seed));
    if (auto* pm = std::get_if<detail::PointMassState>(&state_)) {
      for (;;) {
        for (int i = 0; i < 2; ++i) pm->pos[i] = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < 2; ++i) pm->goal[i] = rng.uniform(-1.0, 1.0);
        if (std::hypot(pm->pos[0] - pm->goal[0], pm->pos[1] - pm->goal[1]) >=
            0.5)
          break;
      }
      pm->vel[0] = pm->vel[1] = 0.0;
    } else {
      auto& p = std::get<detail::PendulumState>(state_);
      p.theta = rng.uniform(-M_PI, M_PI);
      p.theta_dot = rng.uniform(-1.0, 1.0);
    }
    step_count_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(const ActionVec& action) {
    require(!done_, Errc::stepped_after_done, spec_.name);
    require(static_cast<int>(action.values.size()) == spec_.act_dim,
            Errc::dimension_mismatch,
            strprintf("action has %zu entries, expected %d",
                      action.values.size(), spec_.act_dim));
    require(all_finite(action.values), Errc::non_finite_input, "action");

    std::vector<double> clipped = action.values;
    for (double& a : clipped)
      a = std::min(std::max(a, spec_.action_low), spec_.action_high);

    RewardVector r;
    if (auto* pm = std::get_if<detail::PointMassState>(&state_)) {
      double d_prev = std::hypot(pm->pos[0] - pm->goal[0],
                                 pm->pos[1] - pm->goal[1]);
      // Semi-implicit Euler with linear drag.
      for (int i = 0; i < 2; ++i) {
        pm->vel[i] += detail::kDt * (clipped[i] - 0.1 * pm->vel[i]);
        pm->pos[i] += detail::kDt * pm->vel[i];
      }
      double d = std::hypot(pm->pos[0] - pm->goal[0], pm->pos[1] - pm->goal[1]);
      double vel_sq = pm->vel[0] * pm->vel[0] + pm->vel[1] * pm->vel[1];
      double force_sq = clipped[0] * clipped[0] + clipped[1] * clipped[1];
      r.components = {std::exp(-2.0 * d), 10.0 * (d_prev - d), -0.05 * vel_sq,
                      -0.01 * force_sq};
    } else {
      auto& p = std::get<detail::PendulumState>(state_);
      // Rod pendulum, theta = 0 upright (swing-up task): g = 10, m = l = 1,
      // theta_ddot = (3g/2l) sin(theta) + (3/ml^2) torque, theta_dot
      // clamped to +-8.
      constexpr double g = 10.0, m = 1.0, l = 1.0;
      double torque = clipped[0];
      p.theta_dot += detail::kDt * (3.0 * g / (2.0 * l) * std::sin(p.theta) +
                                    3.0 / (m * l * l) * torque);
      p.theta_dot = std::min(std::max(p.theta_dot, -8.0), 8.0);
      p.theta += detail::kDt * p.theta_dot;
      double th = detail::wrap_angle(p.theta);
      r.components = {-th * th, -0.1 * p.theta_dot * p.theta_dot,
                      -0.001 * torque * torque};
    }

    ++step_count_;
    done_ = step_count_ >= spec_.horizon;
    return StepResult{observe(), std::move(r), done_};
  }

  bool done() const { return done_; }
  int step_count() const { return step_count_; }

  // Direct state access for tests and diagnostics.
  detail::PointMassState& point_mass() {
    return std::get<detail::PointMassState>(state_);
  }
  detail::PendulumState& pendulum() {
    return std::get<detail::PendulumState>(state_);
  }

  // Text descriptions fed into LLM prompts.
  std::string task_description() const;
  std::string env_description() const;
  std::string reward_description() const;

 private:
  Env(EnvSpec spec, std::uint64_t seed,
      std::variant<detail::PointMassState, detail::PendulumState> state)
      : spec_(std::move(spec)), seed_(seed), state_(state) {}

  Observation observe() const {
    Observation o;
    if (const auto* pm = std::get_if<detail::PointMassState>(&state_)) {
      o.values = {pm->pos[0], pm->pos[1], pm->vel[0],
                  pm->vel[1], pm->goal[0], pm->goal[1]};
    } else {
      const auto& p = std::get<detail::PendulumState>(state_);
      o.values = {std::cos(p.theta), std::sin(p.theta), p.theta_dot};
    }
    return o;
  }

  EnvSpec spec_;
  std::uint64_t seed_;
  std::variant<detail::PointMassState, detail::PendulumState> state_;
  int step_count_ = 0;
  bool done_ = false;
};

inline Env Env::make(const std::string& name, std::uint64_t seed) {
  if (name == "point-mass-nav") {
    EnvSpec spec;
    spec.name = name;
    spec.obs_dim = 6;
    spec.act_dim = 2;
    spec.num_components = 4;
    spec.reward_names = {"pos", "progress", "vel_penalty", "energy"};
    spec.obs_field_names = {"pos_x", "pos_y", "vel_x",
                            "vel_y", "goal_x", "goal_y"};
    spec.horizon = 200;
    spec.action_low = -1.0;
    spec.action_high = 1.0;
    return Env(std::move(spec), seed, detail::PointMassState{});
  }
  if (name == "pendulum-decomposed") {
    EnvSpec spec;
    spec.name = name;
    spec.obs_dim = 3;
    spec.act_dim = 1;
    spec.num_components = 3;
    spec.reward_names = {"angle", "angvel_penalty", "energy"};
    spec.obs_field_names = {"cos_theta", "sin_theta", "theta_dot"};
    spec.horizon = 200;
    spec.action_low = -2.0;
    spec.action_high = 2.0;
    return Env(std::move(spec), seed, detail::PendulumState{});
  }
  fail(Errc::unknown_env, name);
}

inline std::string Env::task_description() const {
  if (spec_.name == "point-mass-nav") {
    return "The task involves guiding a force-controlled point mass on a 2-D "
           "plane to a goal position. The agent applies a bounded force each "
           "step and must reach the goal quickly while keeping velocity and "
           "control effort low. The episode lasts a fixed number of steps.";
  }
  return "The task involves swinging up and balancing a torque-controlled "
         "pendulum at the upright position. The agent applies a bounded "
         "torque each step and must keep the angle near upright with low "
         "angular velocity and low control effort. The episode lasts a fixed "
         "number of steps.";
}

inline std::string Env::env_description() const {
  std::string s = "Environment '" + spec_.name + "': observation = [";
  for (size_t i = 0; i < spec_.obs_field_names.size(); ++i) {
    if (i) s += ", ";
    s += spec_.obs_field_names[i];
  }
  s += strprintf("], action dimension = %d with each component bounded to "
                 "[%g, %g], horizon = %d steps.",
                 spec_.act_dim, spec_.action_low, spec_.action_high,
                 spec_.horizon);
  return s;
}

inline std::string Env::reward_description() const {
  if (spec_.name == "point-mass-nav") {
    return "1. pos reward: exp(-2*distance) between the mass and the goal; "
           "grows as the mass approaches the goal.\n"
           "2. progress reward: 10 times the per-step decrease in goal "
           "distance; rewards moving toward the goal.\n"
           "3. vel_penalty reward: -0.05 times squared speed; discourages "
           "high velocity.\n"
           "4. energy reward: -0.01 times squared force magnitude; "
           "discourages control effort.";
  }
  return "1. angle reward: negative squared angle from upright (wrapped to "
         "[-pi, pi]); rewards staying upright.\n"
         "2. angvel_penalty reward: -0.1 times squared angular velocity; "
         "discourages spinning.\n"
         "3. energy reward: -0.001 times squared torque; discourages control "
         "effort.";
}

}  // namespace ahrs
