#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dobnet/env.hpp"
#include "dobnet/observer.hpp"

using namespace dobnet;
using namespace dobnet::observer;

namespace {

struct Fit {
  double slope = 0.0;
  double r2 = 0.0;
};

Fit fit_line(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  Fit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pred = icpt + f.slope * static_cast<double>(i);
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - sy / n) * (y[i] - sy / n);
  }
  f.r2 = 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace

TEST(Observer, ConstantDisturbanceErrorDecaysGeometrically) {
  const env::PlantParams plant;
  const double c = 1.0, dt = 0.05;
  const Vec3 d(30, -20, 10);
  const Vec3 u(5, 5, -5);
  DisturbanceObserver dob(plant, c, dt);
  env::State x;
  x.qdot = Vec3(0.3, -0.2, 0.1);
  dob.reset(x);
  std::vector<double> log_err;
  Vec3 u_prev = Vec3::Zero();
  for (int k = 0; k < 200; ++k) {
    const Vec3 d_hat = dob.update(x, u_prev);
    if (k >= 1) log_err.push_back(std::log((d - d_hat).norm()));
    x = env::step(x, u, d, plant, dt);
    u_prev = u;
  }
  const Fit f = fit_line(log_err);
  EXPECT_NEAR(std::exp(f.slope), 1.0 - c * dt, 0.01 * (1.0 - c * dt));
  EXPECT_GT(f.r2, 0.999);
}

TEST(Observer, ZeroDisturbanceWithConsistentInitStaysAtZero) {
  const env::PlantParams plant;
  DisturbanceObserver dob(plant, 2.0, 0.05);
  env::State x;
  x.q = Vec3(1, -1, 0.5);
  x.qdot = Vec3(0.4, 0.1, -0.3);
  dob.reset(x);
  const Vec3 u(20, -10, 0);
  Vec3 u_prev = u;
  for (int k = 0; k < 200; ++k) {
    const Vec3 d_hat = dob.update(x, u_prev);
    EXPECT_LT(d_hat.norm(), 1e-9) << "step " << k;
    x = env::step(x, u, Vec3::Zero(), plant, 0.05);
    u_prev = u;
  }
}

TEST(Observer, SinusoidAttenuationMatchesFirstOrderLag) {
  // Error measured against the disturbance at the current sample time.
  const env::PlantParams plant;
  const double c = 2.0, dt = 0.05, period = 5.0, amp = 50.0;
  const double w = 2.0 * std::numbers::pi / period;
  DisturbanceObserver dob(plant, c, dt);
  env::State x;
  dob.reset(x);
  Vec3 u_prev = Vec3::Zero();
  double peak = 0.0;
  const int steps = 1200;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const Vec3 d(amp * std::sin(w * t), 0, 0);
    const Vec3 d_hat = dob.update(x, u_prev);
    if (t >= 40.0) peak = std::max(peak, std::abs(d[0] - d_hat[0]));
    const Vec3 u = Vec3::Zero();
    x = env::step(x, u, d, plant, dt);
    u_prev = u;
  }
  const double predicted = w / std::sqrt(w * w + c * c);
  EXPECT_NEAR(peak / amp, predicted, 0.05 * predicted);
}

TEST(Observer, UpdateDependsOnlyOnStateAndInputs) {
  const env::PlantParams plant;
  DisturbanceObserver a(plant, 2.0, 0.05), b(plant, 2.0, 0.05);
  a.set_internal_state(Vec3(1, 2, 3));
  b.set_internal_state(Vec3(1, 2, 3));
  env::State x;
  x.qdot = Vec3(0.5, -0.5, 0.25);
  EXPECT_EQ(a.update(x, Vec3(3, 2, 1)), b.update(x, Vec3(3, 2, 1)));
  EXPECT_EQ(a.internal_state(), b.internal_state());
}

TEST(Observer, UnstableGainRejected) {
  EXPECT_THROW(DisturbanceObserver(env::PlantParams{}, 20.0, 0.05), ConfigError);
  EXPECT_THROW(DisturbanceObserver(env::PlantParams{}, 0.0, 0.05), ConfigError);
}

TEST(Dobc, Examples) {
  const env::PlantParams limits;
  const FeedbackGains g;
  const env::State origin;
  EXPECT_EQ(dobc_control(origin, Vec3(50, 0, 0), g, limits), Vec3(-50, 0, 0));
  EXPECT_EQ(dobc_control(origin, Vec3(200, 0, 0), g, limits), Vec3(-120, 0, 0));
  env::State x;
  x.q = Vec3(0.1, -0.2, 0.3);
  x.qdot = Vec3(0.05, 0.1, -0.2);
  const Vec3 pd = -g.kp.cwiseProduct(x.q) - g.kd.cwiseProduct(x.qdot);
  EXPECT_EQ(dobc_control(x, Vec3::Zero(), g, limits), pd);
}

TEST(RiseLike, Examples) {
  const env::PlantParams limits;
  const FeedbackGains g;
  RiseLikeController ctl(limits, g, 0.05);
  ctl.reset();
  EXPECT_EQ(ctl.act(env::State{}), Vec3::Zero());

  env::State x;
  x.q = Vec3(0.01, 0, 0);
  ctl.reset();
  for (int k = 1; k <= 30; ++k) {
    ctl.act(x);
    EXPECT_DOUBLE_EQ(ctl.integral()[0], std::min(k * 0.05, g.integral_bound));
  }

  RiseLikeController pos(limits, g, 0.05), neg(limits, g, 0.05);
  env::State xp, xn;
  xp.q = Vec3(0.2, -0.1, 0.05);
  xp.qdot = Vec3(0.1, 0.2, -0.3);
  xn.q = -xp.q;
  xn.qdot = -xp.qdot;
  for (int k = 0; k < 10; ++k) EXPECT_LT((pos.act(xp) + neg.act(xn)).norm(), 1e-12);
}

TEST(Controllers, OutputsAlwaysWithinLimits) {
  const env::PlantParams plant;
  Rng rng = make_rng(8);
  std::normal_distribution<double> n(0.0, 5.0);
  DobcController dobc(plant, FeedbackGains{}, 2.0, 0.05);
  RiseLikeController rise(plant, FeedbackGains{}, 0.05);
  env::State x;
  dobc.reset(x);
  rise.reset();
  for (int k = 0; k < 5000; ++k) {
    for (int i = 0; i < 3; ++i) {
      x.q[i] = n(rng);
      x.qdot[i] = n(rng);
    }
    for (const Vec3& u : {dobc.act(x), rise.act(x)}) {
      ASSERT_TRUE((u.array() <= plant.control_upper.array()).all());
      ASSERT_TRUE((u.array() >= plant.control_lower.array()).all());
    }
  }
}

TEST(Controllers, DobcRegulatesUnderModerateDisturbance) {
  const env::PlantParams plant;
  DobcController ctl(plant, FeedbackGains{}, 2.0, 0.05);
  env::State x;
  x.q = Vec3(1.5, -1.0, 0.5);
  ctl.reset(x);
  const Vec3 d(60, -40, 20);
  for (int k = 0; k < 200; ++k) x = env::step(x, ctl.act(x), d, plant, 0.05);
  EXPECT_LT(x.q.norm(), 0.05);
  EXPECT_NEAR((ctl.last_estimate() - d).norm(), 0.0, 1.0);
}
