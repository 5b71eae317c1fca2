#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dobnet/env.hpp"

using namespace dobnet;
using namespace dobnet::env;

namespace {

PlantParams frictionless() {
  PlantParams p;
  p.drag_linear.setZero();
  p.drag_quadratic.setZero();
  return p;
}

}  // namespace

TEST(ClampControl, Examples) {
  const PlantParams p;
  EXPECT_EQ(clamp_control(Vec3(150, -150, 60), p), Vec3(120, -120, 60));
  EXPECT_EQ(clamp_control(Vec3::Zero(), p), Vec3::Zero());
  EXPECT_EQ(clamp_control(Vec3::Constant(120), p), Vec3::Constant(120));
}

TEST(Step, UnitAccelerationArithmetic) {
  const State x = step(State{}, Vec3(60, 0, 0), Vec3::Zero(), frictionless(), 0.05);
  EXPECT_DOUBLE_EQ(x.qdot[0], 0.05);
  EXPECT_DOUBLE_EQ(x.q[0], 0.0025);
  EXPECT_EQ(x.q.tail<2>(), Eigen::Vector2d::Zero());
}

TEST(Step, CancelledForceLeavesRestStateUnchanged) {
  const Vec3 d(37.5, -80.25, 3.0);
  const State x = step(State{}, -d, d, PlantParams{}, 0.05);
  EXPECT_TRUE(x.q.isZero(0.0));
  EXPECT_TRUE(x.qdot.isZero(0.0));
}

TEST(Step, LinearDragConstantForceFollowsExponentialResponse) {
  PlantParams p;
  p.drag_quadratic.setZero();
  const Vec3 F(90, -40, 10);
  const double dt = 0.05, k = 20.0, m = 60.0;
  State x;
  for (int n = 1; n <= 100; ++n) {
    x = step(x, F, Vec3::Zero(), p, dt);
    const double t = n * dt;
    for (int i = 0; i < 3; ++i) {
      const double v_exact = F[i] / k * (1.0 - std::exp(-k * t / m));
      EXPECT_NEAR(x.qdot[i], v_exact, 0.01 * std::abs(v_exact)) << "step " << n << " axis " << i;
      // Position against the recurrence solved in closed form.
      const double a = 1.0 - k * dt / m;
      const double q_disc = dt * F[i] / k * (n - a * (1.0 - std::pow(a, n)) / (1.0 - a));
      EXPECT_NEAR(x.q[i], q_disc, 1e-12 * std::max(1.0, std::abs(q_disc)));
    }
  }
  // Terminal velocity after 5 s is F/k to within 1% (e^{-5/3} residual excluded).
  EXPECT_NEAR(x.qdot[0] / (1.0 - std::exp(-k * 5.0 / m)), F[0] / k, 0.01 * F[0] / k);
}

TEST(Step, FrictionlessMatchesDiscreteDoubleIntegratorExactly) {
  const PlantParams p = frictionless();
  const Vec3 f(12, -30, 6);
  const double dt = 0.05;
  State x;
  x.q = Vec3(1, 2, -3);
  x.qdot = Vec3(0.5, 0, -0.25);
  const State x0 = x;
  const Vec3 a = f / p.mass;
  for (int n = 1; n <= 200; ++n) {
    x = step(x, f, Vec3::Zero(), p, dt);
    const Vec3 v = x0.qdot + n * dt * a;
    const Vec3 q = x0.q + n * dt * x0.qdot + dt * dt * a * (n * (n + 1) / 2.0);
    EXPECT_NEAR((x.qdot - v).norm(), 0.0, 1e-12);
    EXPECT_NEAR((x.q - q).norm(), 0.0, 1e-10);
  }
}

TEST(Step, ZeroInputKineticEnergyNeverIncreases) {
  // Holds whenever dt (k_l + k_q |v|) / m < 2; sampled ranges stay well inside.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> drag(0.0, 60.0), vel(-10.0, 10.0), pos(-5.0, 5.0);
  for (int trial = 0; trial < 10000; ++trial) {
    PlantParams p;
    for (int i = 0; i < 3; ++i) {
      p.drag_linear[i] = drag(rng);
      p.drag_quadratic[i] = drag(rng);
    }
    State x;
    for (int i = 0; i < 3; ++i) {
      x.q[i] = pos(rng);
      x.qdot[i] = vel(rng);
    }
    double energy = 0.5 * p.mass * x.qdot.squaredNorm();
    for (int k = 0; k < 5; ++k) {
      x = step(x, Vec3::Zero(), Vec3::Zero(), p, 0.05);
      const double e = 0.5 * p.mass * x.qdot.squaredNorm();
      ASSERT_LE(e, energy) << "trial " << trial;
      energy = e;
    }
  }
}

TEST(Step, DeterministicAndPure) {
  State x;
  x.q = Vec3(0.1, 0.2, 0.3);
  x.qdot = Vec3(-1, 0.5, 2);
  const State a = step(x, Vec3(5, 6, 7), Vec3(-1, 2, 0), PlantParams{}, 0.05);
  const State b = step(x, Vec3(5, 6, 7), Vec3(-1, 2, 0), PlantParams{}, 0.05);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.qdot, b.qdot);
  EXPECT_EQ(x.q, Vec3(0.1, 0.2, 0.3));
}

TEST(Step, NonFiniteStateRaisesDiverged) {
  State x;
  x.qdot = Vec3(1e308, 0, 0);
  EXPECT_THROW(step(x, Vec3::Zero(), Vec3::Zero(), PlantParams{}, 0.05), DivergedError);
}

TEST(Reward, Examples) {
  const RewardWeights w;
  EXPECT_EQ(running_reward(State{}, Vec3::Zero(), w), 0.0);
  State x;
  x.q = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(running_reward(x, Vec3(100, 0, 0), w), -2.0);
  EXPECT_EQ(final_reward(State{}, w), 0.0);
  State y;
  y.q = Vec3(0, 2, 0);
  EXPECT_DOUBLE_EQ(final_reward(y, w), -4.0);
}

TEST(Reward, PermutationInvariantNegativeAndFinalDominates) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  const RewardWeights w;
  for (int trial = 0; trial < 1000; ++trial) {
    State x;
    Vec3 u;
    for (int i = 0; i < 3; ++i) {
      x.q[i] = n(rng);
      x.qdot[i] = n(rng);
      u[i] = 40.0 * n(rng);
    }
    State xp;
    xp.q = Vec3(x.q[2], x.q[0], x.q[1]);
    xp.qdot = Vec3(x.qdot[2], x.qdot[0], x.qdot[1]);
    const Vec3 up(u[2], u[0], u[1]);
    const double r = running_reward(x, u, w);
    EXPECT_NEAR(running_reward(xp, up, w), r, 1e-12 * std::abs(r));
    EXPECT_LT(r, 0.0);
    EXPECT_GE(final_reward(x, w), r);
  }
}

TEST(Reset, ZeroBoxGivesOriginAtRest) {
  EpisodeConfig cfg;
  cfg.start_position_box.setZero();
  cfg.start_velocity_box.setZero();
  Rng rng = make_rng(3);
  for (int i = 0; i < 10; ++i) {
    const State x = reset(cfg, rng);
    EXPECT_TRUE(x.q.isZero(0.0));
    EXPECT_TRUE(x.qdot.isZero(0.0));
  }
}

TEST(Reset, EmpiricalMeanWithinThreeSigma) {
  EpisodeConfig cfg;
  Rng rng = make_rng(17);
  const int n = 10000;
  Vec3 sum = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const State x = reset(cfg, rng);
    ASSERT_LE(x.q.cwiseAbs().maxCoeff(), 2.0);
    ASSERT_LE(x.qdot.cwiseAbs().maxCoeff(), 0.5);
    sum += x.q;
  }
  const double sigma_mean = 2.0 / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(sum[i] / n), 3.0 * sigma_mean);
}

TEST(Reset, SameSeedSameStart) {
  Rng a = make_rng(5), b = make_rng(5);
  const State xa = reset(EpisodeConfig{}, a), xb = reset(EpisodeConfig{}, b);
  EXPECT_EQ(xa.q, xb.q);
  EXPECT_EQ(xa.qdot, xb.qdot);
}

TEST(PlantParamsContract, ValidateRejectsBadValues) {
  PlantParams p;
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = PlantParams{};
  p.drag_quadratic[1] = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = PlantParams{};
  p.control_lower[2] = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Environment, EpisodeRunsFullHorizonWithFinalRewardOnLastStep) {
  Environment env(PlantParams{}, RewardWeights{}, EpisodeConfig{});
  Rng rng = make_rng(0);
  env.reset(rng, disturbance::DisturbanceSignal::constant(Vec3(10, 0, 0)));
  int steps = 0;
  StepResult last;
  while (!env.done()) {
    last = env.step(Vec3(200, 0, -5));
    ++steps;
    EXPECT_LE(last.u_exec.cwiseAbs().maxCoeff(), 120.0);
    if (!last.terminal) {
      EXPECT_EQ(last.final, 0.0);
    }
  }
  EXPECT_EQ(steps, 200);
  EXPECT_TRUE(last.terminal);
  EXPECT_FALSE(last.diverged);
  EXPECT_DOUBLE_EQ(last.final, final_reward(env.state(), RewardWeights{}));
  EXPECT_THROW(env.step(Vec3::Zero()), ContractViolation);
}

TEST(Environment, DivergenceTerminatesEarly) {
  EpisodeConfig cfg;
  cfg.divergence_radius = 1.0;
  Environment env(frictionless(), RewardWeights{}, cfg);
  env.start(State{}, disturbance::DisturbanceSignal::constant(Vec3(500, 0, 0)));
  StepResult r;
  int steps = 0;
  while (!env.done()) {
    r = env.step(Vec3(120, 0, 0));
    ++steps;
  }
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(steps, 200);
  EXPECT_GT(r.next.q.norm(), 1.0);
}

TEST(Environment, DisturbanceSampledAtStepStartTime) {
  Environment env(PlantParams{}, RewardWeights{}, EpisodeConfig{});
  disturbance::SinusoidSignal s;
  s.axes[0].push_back({10.0, 2.0, 0.0});
  env.start(State{}, disturbance::DisturbanceSignal(s));
  for (int k = 0; k < 5; ++k) {
    const double t = env.time();
    const StepResult r = env.step(Vec3::Zero());
    EXPECT_DOUBLE_EQ(r.d[0], 10.0 * std::sin(2.0 * std::numbers::pi * t / 2.0));
  }
}
