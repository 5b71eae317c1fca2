/// @file observer.hpp
/// @brief Discrete nonlinear disturbance observer and the two classical
/// baseline controllers built around it.
///
/// Observer (gain L = c I, auxiliary p(q, q') = c m q'):
///   d_hat   = y + p(x_t)                      (estimate of d acting over the previous step)
///   y_tilde = G(x_t) - p(x_t) - u_{t-1}
///   y      <- (1 - c dt) y + c dt y_tilde
/// For the exact model and constant input the estimation error contracts by
/// (1 - c dt) per step.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/types.hpp"

namespace dobnet::observer {

class DisturbanceObserver {
 public:
  DisturbanceObserver(env::PlantParams model, double gain, double dt)
      : model_(model), c_(gain), dt_(dt) {
    if (!(c_ > 0.0)) throw ConfigError("observer: gain c must be > 0");
    if (!(dt_ > 0.0)) throw ConfigError("observer: dt must be > 0");
    if (!(c_ * dt_ < 1.0)) {
      throw ConfigError("observer: c*dt = " + std::to_string(c_ * dt_) + " must be < 1 for a stable discrete observer");
    }
  }

  double gain() const { return c_; }
  const Vec3& internal_state() const { return y_; }

  Vec3 auxiliary(const env::State& x) const { return c_ * model_.mass * x.qdot; }

  /// Makes the first estimate zero for a vehicle starting at x0.
  void reset(const env::State& x0) { y_ = -auxiliary(x0); }
  void set_internal_state(const Vec3& y) { y_ = y; }

  /// Consumes the current state and the previously executed (clamped)
  /// control; returns the estimate of the disturbance over the last step.
  Vec3 update(const env::State& x, const Vec3& u_prev) {
    const Vec3 p = auxiliary(x);
    const Vec3 d_hat = y_ + p;
    const Vec3 y_tilde = env::generalized_force(model_, x) - p - u_prev;
    y_ = (1.0 - c_ * dt_) * y_ + c_ * dt_ * y_tilde;
    if (!y_.allFinite()) throw NonFiniteError("observer: internal state became non-finite");
    return d_hat;
  }

 private:
  env::PlantParams model_;
  double c_;
  double dt_;
  Vec3 y_ = Vec3::Zero();
};

struct FeedbackGains {
  Vec3 kp = Vec3::Constant(80.0);
  Vec3 kd = Vec3::Constant(60.0);
  Vec3 ki = Vec3::Constant(20.0);
  double integral_bound = 1.0;

  void validate() const {
    if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any() || (ki.array() < 0.0).any()) {
      throw ConfigError("feedback gains must be >= 0");
    }
    if (integral_bound < 0.0) throw ConfigError("integral bound must be >= 0");
  }
};

/// PD regulation plus feedforward cancellation of the estimate, saturated.
inline Vec3 dobc_control(const env::State& x, const Vec3& d_hat, const FeedbackGains& g,
                         const env::PlantParams& limits) {
  const Vec3 u = -g.kp.cwiseProduct(x.q) - g.kd.cwiseProduct(x.qdot) - d_hat;
  return env::clamp_control(u, limits);
}

/// Observer + DOBC with the one-step-delayed estimate.
class DobcController {
 public:
  DobcController(env::PlantParams model, FeedbackGains gains, double observer_gain, double dt)
      : model_(model), gains_(gains), dob_(model, observer_gain, dt) {
    gains_.validate();
  }

  void reset(const env::State& x0) {
    dob_.reset(x0);
    u_prev_ = Vec3::Zero();
  }

  Vec3 act(const env::State& x) {
    last_estimate_ = dob_.update(x, u_prev_);
    u_prev_ = dobc_control(x, last_estimate_, gains_, model_);
    return u_prev_;
  }

  const Vec3& last_estimate() const { return last_estimate_; }

 private:
  env::PlantParams model_;
  FeedbackGains gains_;
  DisturbanceObserver dob_;
  Vec3 u_prev_ = Vec3::Zero();
  Vec3 last_estimate_ = Vec3::Zero();
};

inline double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

/// Stand-in for RISE: saturated PD plus a clamped integral of sign(q).
/// This is an approximation, not the published RISE law.
class RiseLikeController {
 public:
  RiseLikeController(env::PlantParams limits, FeedbackGains gains, double dt)
      : limits_(limits), gains_(gains), dt_(dt) {
    gains_.validate();
  }

  void reset() { integral_ = Vec3::Zero(); }
  const Vec3& integral() const { return integral_; }

  Vec3 act(const env::State& x) {
    for (int i = 0; i < 3; ++i) {
      integral_[i] = std::clamp(integral_[i] + sign(x.q[i]) * dt_, -gains_.integral_bound, gains_.integral_bound);
    }
    const Vec3 u = -gains_.kp.cwiseProduct(x.q) - gains_.kd.cwiseProduct(x.qdot) - gains_.ki.cwiseProduct(integral_);
    return env::clamp_control(u, limits_);
  }

 private:
  env::PlantParams limits_;
  FeedbackGains gains_;
  double dt_;
  Vec3 integral_ = Vec3::Zero();
};

}  // namespace dobnet::observer
