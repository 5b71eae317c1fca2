/// @file oracle.hpp
/// @brief Open-loop trajectory optimization with full knowledge of the
/// disturbance realization; the ideal-case reference for every controller.
///
/// Decision variables are the T x 3 clamped control forces. The discounted
/// objective sum_t gamma^t r(x_t, u_t) + gamma^T r_f(x_T) is maximized by
/// projected gradient ascent: the gradient comes from a reverse (adjoint)
/// sweep through the semi-implicit Euler rollout, trial steps use a
/// Barzilai-Borwein length, and Armijo backtracking keeps accepted iterates
/// monotone. Work happens in coordinates scaled by the control half-range so
/// the box is [-1, 1] per element.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/observer.hpp"
#include "dobnet/types.hpp"

namespace dobnet::oracle {

using ControlSequence = std::vector<Vec3>;

struct Problem {
  env::State x0;
  std::vector<Vec3> disturbance;  // d(t_k) for k = 0 .. T-1
  env::PlantParams plant;
  env::RewardWeights weights;
  double dt = 0.05;
  double gamma = 0.99;
  double divergence_radius = 100.0;

  std::size_t horizon() const { return disturbance.size(); }
};

/// Tabulates a disturbance signal on the step grid.
template <typename Signal>
Problem make_problem(const env::State& x0, const Signal& signal, const env::PlantParams& plant,
                     const env::RewardWeights& weights, const env::EpisodeConfig& episode, double gamma) {
  Problem p;
  p.x0 = x0;
  p.plant = plant;
  p.weights = weights;
  p.dt = episode.dt;
  p.gamma = gamma;
  p.divergence_radius = episode.divergence_radius;
  for (int k = 0; k < episode.horizon_steps; ++k) p.disturbance.push_back(signal(k * episode.dt));
  return p;
}

inline ControlSequence project(ControlSequence u, const env::PlantParams& plant) {
  for (auto& v : u) v = env::clamp_control(v, plant);
  return u;
}

/// States x_0 .. x_T; stops early (shorter vector) if the rollout diverges.
inline std::vector<env::State> trajectory(const ControlSequence& u, const Problem& p, bool* diverged = nullptr) {
  if (u.size() != p.horizon()) {
    throw ContractViolation("oracle: control sequence length " + std::to_string(u.size()) + " != horizon " +
                            std::to_string(p.horizon()));
  }
  std::vector<env::State> xs;
  xs.reserve(u.size() + 1);
  xs.push_back(p.x0);
  if (diverged) *diverged = false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    env::State next;
    try {
      next = env::step(xs.back(), u[k], p.disturbance[k], p.plant, p.dt);
    } catch (const DivergedError&) {
      if (diverged) *diverged = true;
      return xs;
    }
    xs.push_back(next);
    if (next.q.norm() > p.divergence_radius) {
      if (diverged) *diverged = true;
      return xs;
    }
  }
  return xs;
}

/// Discounted objective (to be maximized); -infinity for a diverged rollout.
inline double rollout_objective(const ControlSequence& u, const Problem& p) {
  bool diverged = false;
  const auto xs = trajectory(u, p, &diverged);
  if (diverged) return -std::numeric_limits<double>::infinity();
  double J = 0.0;
  double disc = 1.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    J += disc * env::running_reward(xs[k], u[k], p.weights);
    disc *= p.gamma;
  }
  return J + disc * env::final_reward(xs.back(), p.weights);
}

/// Objective plus its gradient with respect to every control element.
inline double objective_and_gradient(const ControlSequence& u, const Problem& p, ControlSequence& grad) {
  bool diverged = false;
  const auto xs = trajectory(u, p, &diverged);
  grad.assign(u.size(), Vec3::Zero());
  if (diverged) return -std::numeric_limits<double>::infinity();

  const std::size_t T = u.size();
  std::vector<double> disc(T + 1);
  disc[0] = 1.0;
  for (std::size_t k = 1; k <= T; ++k) disc[k] = disc[k - 1] * p.gamma;

  const auto& w = p.weights;
  // Same summation order as rollout_objective so the two agree bit for bit.
  double J = 0.0;
  for (std::size_t k = 0; k < T; ++k) J += disc[k] * env::running_reward(xs[k], u[k], w);
  J += disc[T] * env::final_reward(xs[T], w);

  // Costates: dJ/dq_{k+1}, dJ/dqdot_{k+1}.
  Vec3 lam_q = disc[T] * (-2.0 * w.w_pos) * xs[T].q;
  Vec3 lam_v = disc[T] * (-2.0 * w.w_vel) * xs[T].qdot;
  const double h = p.dt;
  const double m = p.plant.mass;
  for (std::size_t k = T; k-- > 0;) {
    // q' = q + h v'  =>  v' also reaches J through q'.
    const Vec3 lam_vnext = lam_v + h * lam_q;
    const Vec3& v = xs[k].qdot;
    // v' = v + h (u + d - k_l v - k_q |v| v - g) / m
    const Vec3 dvnext_dv =
        Vec3::Ones() - (h / m) * (p.plant.drag_linear + 2.0 * p.plant.drag_quadratic.cwiseProduct(v.cwiseAbs()));
    grad[k] = (h / m) * lam_vnext + disc[k] * (-2.0 * w.w_ctrl) * u[k];
    lam_q = lam_q + disc[k] * (-2.0 * w.w_pos) * xs[k].q;
    lam_v = lam_vnext.cwiseProduct(dvnext_dv) + disc[k] * (-2.0 * w.w_vel) * v;
  }
  return J;
}

struct OracleConfig {
  int iterations = 500;
  int restarts = 3;
  double initial_step = 1e-2;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 40;
  double gamma = 0.99;
  // Gains for the DOBC warm start.
  observer::FeedbackGains warm_gains;
  double warm_observer_gain = 2.0;
};

struct OptimizationRun {
  ControlSequence u;
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> accepted;  // objective after every accepted iterate, starting with the initial point
};

struct OracleResult {
  ControlSequence u;
  double objective = -std::numeric_limits<double>::infinity();
  double warm_start_objective = -std::numeric_limits<double>::infinity();
  std::vector<OptimizationRun> runs;  // warm start first, then random restarts
};

/// Controls a DOBC loop would execute on this instance (observer given the
/// true plant); replaying them open loop reproduces the closed-loop rollout.
inline ControlSequence dobc_controls(const Problem& p, const observer::FeedbackGains& gains, double observer_gain) {
  observer::DobcController ctl(p.plant, gains, observer_gain, p.dt);
  ctl.reset(p.x0);
  ControlSequence u;
  env::State x = p.x0;
  for (std::size_t k = 0; k < p.horizon(); ++k) {
    const Vec3 uk = ctl.act(x);
    u.push_back(uk);
    try {
      x = env::step(x, uk, p.disturbance[k], p.plant, p.dt);
    } catch (const DivergedError&) {
      u.resize(p.horizon(), Vec3::Zero());
      break;
    }
  }
  return u;
}

/// Projected-gradient ascent from one starting point.
inline OptimizationRun ascend(ControlSequence u0, const Problem& p, const OracleConfig& cfg) {
  const std::size_t T = p.horizon();
  const Vec3 half = 0.5 * (p.plant.control_upper - p.plant.control_lower);
  const Vec3 mid = 0.5 * (p.plant.control_upper + p.plant.control_lower);

  // Scaled coordinates s = (u - mid) / half live in [-1, 1].
  auto to_u = [&](const std::vector<Vec3>& s) {
    ControlSequence u(T);
    for (std::size_t k = 0; k < T; ++k) u[k] = mid + half.cwiseProduct(s[k]);
    return u;
  };
  auto clip = [](std::vector<Vec3>& s) {
    for (auto& v : s) v = v.cwiseMax(-1.0).cwiseMin(1.0);
  };
  std::vector<Vec3> s(T);
  u0 = project(std::move(u0), p.plant);
  for (std::size_t k = 0; k < T; ++k) s[k] = (u0[k] - mid).cwiseQuotient(half);
  clip(s);

  // The starting point is evaluated as given; the scaled round trip may move
  // it by an ulp.
  OptimizationRun run;
  run.u = u0;
  ControlSequence grad_u;
  double J = objective_and_gradient(u0, p, grad_u);
  std::vector<Vec3> g(T);
  for (std::size_t k = 0; k < T; ++k) g[k] = half.cwiseProduct(grad_u[k]);
  run.accepted.push_back(J);

  double step = cfg.initial_step;
  std::vector<Vec3> cand(T), g_new(T);
  for (int it = 0; it < cfg.iterations && std::isfinite(J); ++it) {
    bool accepted = false;
    double J_new = J;
    double alpha = step;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      double dir_dot = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        cand[k] = (s[k] + alpha * g[k]).cwiseMax(-1.0).cwiseMin(1.0);
        dir_dot += g[k].dot(cand[k] - s[k]);
      }
      if (dir_dot <= 0.0) break;  // projected gradient vanished: stationary on the box
      J_new = rollout_objective(to_u(cand), p);
      if (J_new >= J + cfg.armijo * dir_dot) {
        accepted = true;
        break;
      }
      alpha *= cfg.backtrack;
    }
    if (!accepted) break;

    const double J_checked = objective_and_gradient(to_u(cand), p, grad_u);
    for (std::size_t k = 0; k < T; ++k) g_new[k] = half.cwiseProduct(grad_u[k]);

    // Barzilai-Borwein length for the next trial step (ascent form).
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      const Vec3 ds = cand[k] - s[k];
      const Vec3 dy = g[k] - g_new[k];
      ss += ds.squaredNorm();
      sy += ds.dot(dy);
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e4) : std::min(alpha * 2.0, 1e4);

    s.swap(cand);
    g.swap(g_new);
    J = J_checked;
    run.u = to_u(s);
    run.accepted.push_back(J);
  }
  run.objective = J;
  return run;
}

/// Best of a DOBC warm start and `restarts` uniformly random starts.
inline OracleResult optimize(const Problem& p, const OracleConfig& cfg, Rng& rng) {
  OracleResult res;
  std::vector<ControlSequence> starts;
  starts.push_back(dobc_controls(p, cfg.warm_gains, cfg.warm_observer_gain));
  res.warm_start_objective = rollout_objective(starts.front(), p);
  for (int r = 0; r < cfg.restarts; ++r) {
    ControlSequence u(p.horizon());
    for (auto& v : u) {
      for (int i = 0; i < 3; ++i) {
        v[i] = std::uniform_real_distribution<double>(p.plant.control_lower[i], p.plant.control_upper[i])(rng);
      }
    }
    starts.push_back(std::move(u));
  }
  for (auto& u0 : starts) {
    OptimizationRun run = ascend(std::move(u0), p, cfg);
    if (run.objective > res.objective || res.runs.empty()) {
      res.objective = run.objective;
      res.u = run.u;
    }
    res.runs.push_back(std::move(run));
  }
  return res;
}

}  // namespace dobnet::oracle
