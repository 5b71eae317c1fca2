/// @file env.hpp
/// @brief Disturbed 3-DOF rigid-body plant, quadratic reward, episode protocol.
///
/// Plant: m q'' + k_l q' + k_q |q'| o q' + g = u + d(t), integrated with
/// semi-implicit Euler. Positions are expressed relative to the target, so
/// regulation means driving q to the origin.

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "dobnet/disturbance.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/types.hpp"

namespace dobnet::env {

struct State {
  Vec3 q = Vec3::Zero();     // m
  Vec3 qdot = Vec3::Zero();  // m/s

  /// [q; qdot]
  Eigen::Matrix<double, 6, 1> flat() const {
    Eigen::Matrix<double, 6, 1> x;
    x << q, qdot;
    return x;
  }

  bool finite() const { return q.allFinite() && qdot.allFinite(); }
};

struct PlantParams {
  double mass = 60.0;
  Vec3 drag_linear = Vec3::Constant(20.0);
  Vec3 drag_quadratic = Vec3::Constant(30.0);
  Vec3 gravity_buoyancy = Vec3::Zero();
  Vec3 control_upper = Vec3::Constant(120.0);
  Vec3 control_lower = Vec3::Constant(-120.0);

  void validate() const {
    if (!(mass > 0.0)) throw ConfigError("plant: mass must be > 0");
    if ((drag_linear.array() < 0.0).any() || (drag_quadratic.array() < 0.0).any()) {
      throw ConfigError("plant: drag coefficients must be >= 0");
    }
    if (!((control_lower.array() < 0.0).all() && (control_upper.array() > 0.0).all())) {
      throw ConfigError("plant: control limits must satisfy lower < 0 < upper on every axis");
    }
  }
};

struct RewardWeights {
  double w_pos = 1.0;
  double w_vel = 0.1;
  double w_ctrl = 1e-4;
};

struct EpisodeConfig {
  int horizon_steps = 200;
  double dt = 0.05;
  Vec3 start_position_box = Vec3::Constant(2.0);
  Vec3 start_velocity_box = Vec3::Constant(0.5);
  std::uint64_t seed = 0;
  double divergence_radius = 100.0;

  void validate() const {
    if (horizon_steps <= 0) throw ConfigError("episode: horizon_steps must be > 0");
    if (!(dt > 0.0)) throw ConfigError("episode: dt must be > 0");
  }
};

inline Vec3 clamp_control(const Vec3& u_raw, const PlantParams& p) {
  return u_raw.cwiseMax(p.control_lower).cwiseMin(p.control_upper);
}

/// D(q')q': linear plus quadratic drag, per axis.
inline Vec3 drag_force(const PlantParams& p, const Vec3& qdot) {
  return p.drag_linear.cwiseProduct(qdot) + p.drag_quadratic.cwiseProduct(qdot.cwiseAbs().cwiseProduct(qdot));
}

/// G(q, q') = drag + gravity/buoyancy residual (Coriolis vanishes for pure translation).
inline Vec3 generalized_force(const PlantParams& p, const State& x) {
  return drag_force(p, x.qdot) + p.gravity_buoyancy;
}

inline State step(const State& x, const Vec3& u, const Vec3& d, const PlantParams& p, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("env::step: dt must be > 0");
  const Vec3 acc = (u + d - generalized_force(p, x)) / p.mass;
  State next;
  next.qdot = x.qdot + acc * dt;
  next.q = x.q + next.qdot * dt;
  if (!next.finite()) throw DivergedError("env::step: non-finite state");
  return next;
}

inline double running_reward(const State& x, const Vec3& u, const RewardWeights& w) {
  return -(w.w_pos * x.q.squaredNorm() + w.w_vel * x.qdot.squaredNorm() + w.w_ctrl * u.squaredNorm());
}

inline double final_reward(const State& x, const RewardWeights& w) {
  return -(w.w_pos * x.q.squaredNorm() + w.w_vel * x.qdot.squaredNorm());
}

/// Uniform start inside the configured boxes.
inline State reset(const EpisodeConfig& cfg, Rng& rng) {
  State x;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    const double a = unit(rng);
    x.q[i] = a * cfg.start_position_box[i];
  }
  for (int i = 0; i < 3; ++i) {
    const double a = unit(rng);
    x.qdot[i] = a * cfg.start_velocity_box[i];
  }
  return x;
}

struct StepResult {
  State next;
  Vec3 u_exec = Vec3::Zero();
  Vec3 d = Vec3::Zero();
  double running = 0.0;       // r(x_t, u_t)
  double final = 0.0;         // r_f(x_T), nonzero only on terminal steps
  bool terminal = false;
  bool diverged = false;

  double reward() const { return running + final; }
};

/// One plant instance plus the disturbance acting in the current episode.
/// Not shared between workers.
class Environment {
 public:
  Environment(PlantParams plant, RewardWeights weights, EpisodeConfig episode)
      : plant_(plant), weights_(weights), episode_(episode) {
    plant_.validate();
    episode_.validate();
  }

  const PlantParams& plant() const { return plant_; }
  const RewardWeights& weights() const { return weights_; }
  const EpisodeConfig& episode() const { return episode_; }
  const State& state() const { return state_; }
  int steps_taken() const { return steps_; }
  double time() const { return steps_ * episode_.dt; }
  bool done() const { return done_; }
  const disturbance::DisturbanceSignal& signal() const { return signal_; }

  /// Starts a new episode from a random state.
  const State& reset(Rng& rng, disturbance::DisturbanceSignal signal) {
    return start(env::reset(episode_, rng), std::move(signal));
  }

  const State& start(const State& x0, disturbance::DisturbanceSignal signal) {
    state_ = x0;
    signal_ = std::move(signal);
    steps_ = 0;
    done_ = false;
    return state_;
  }

  StepResult step(const Vec3& u_raw) {
    if (done_) throw ContractViolation("Environment::step: episode already finished; call reset");
    StepResult res;
    res.u_exec = clamp_control(u_raw, plant_);
    res.d = signal_(time());
    res.running = running_reward(state_, res.u_exec, weights_);
    try {
      res.next = env::step(state_, res.u_exec, res.d, plant_, episode_.dt);
      res.diverged = res.next.q.norm() > episode_.divergence_radius;
    } catch (const DivergedError&) {
      res.next = state_;
      res.diverged = true;
    }
    ++steps_;
    res.terminal = res.diverged || steps_ >= episode_.horizon_steps;
    if (res.terminal) res.final = final_reward(res.next, weights_);
    state_ = res.next;
    done_ = res.terminal;
    return res;
  }

 private:
  PlantParams plant_;
  RewardWeights weights_;
  EpisodeConfig episode_;
  State state_;
  disturbance::DisturbanceSignal signal_;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace dobnet::env
