#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dobnet/disturbance.hpp"

using namespace dobnet;
using namespace dobnet::disturbance;

namespace {

const Vec3 kLimits = Vec3::Constant(120.0);

ScenarioSpec small() { return ScenarioSpec{}; }

ScenarioSpec large() {
  ScenarioSpec s;
  s.amplitude_sum_range = {1.3, 1.5};
  return s;
}

}  // namespace

TEST(SampleScenario, SmallAmplitudeSumsInBand) {
  Rng rng = make_rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto sig = sample_scenario(small(), kLimits, rng);
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ(sig.axes[a].size(), 3u);
      EXPECT_GE(sig.amplitude_sum(a), 120.0 - 1e-9);
      EXPECT_LE(sig.amplitude_sum(a), 144.0 + 1e-9);
      for (const auto& c : sig.axes[a]) {
        EXPECT_GT(c.amplitude, 0.0);
        EXPECT_GE(c.period, 1.0);
        EXPECT_LE(c.period, 10.0);
        EXPECT_GE(c.phase, 0.0);
        EXPECT_LT(c.phase, 2.0 * std::numbers::pi);
      }
    }
  }
}

TEST(SampleScenario, LargeAmplitudeSumsInBand) {
  Rng rng = make_rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto sig = sample_scenario(large(), kLimits, rng);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(sig.amplitude_sum(a), 156.0 - 1e-9);
      EXPECT_LE(sig.amplitude_sum(a), 180.0 + 1e-9);
    }
  }
}

TEST(SampleScenario, CollapsedRangeSingleComponentIsDeterministic) {
  ScenarioSpec s;
  s.n_components = 1;
  s.amplitude_sum_range = {1.25, 1.25};
  Rng rng = make_rng(3);
  const auto sig = sample_scenario(s, kLimits, rng);
  for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(sig.axes[a][0].amplitude, 150.0);
}

TEST(SampleScenario, SameStreamStateReproduces) {
  Rng a = make_rng(9), b = make_rng(9);
  const auto sa = sample_scenario(large(), kLimits, a);
  const auto sb = sample_scenario(large(), kLimits, b);
  for (double t : {0.0, 0.37, 4.2, 9.95}) EXPECT_EQ(eval_sinusoid(sa, t), eval_sinusoid(sb, t));
}

TEST(SampleScenario, InvalidSpecRejected) {
  ScenarioSpec s;
  s.n_components = 0;
  Rng rng = make_rng(0);
  EXPECT_THROW(sample_scenario(s, kLimits, rng), ConfigError);
  s = ScenarioSpec{};
  s.period_range = {0.0, 1.0};
  EXPECT_THROW(sample_scenario(s, kLimits, rng), ConfigError);
}

TEST(EvalSinusoid, QuarterPeriodPeak) {
  SinusoidSignal s;
  s.axes[0].push_back({10.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(eval_sinusoid(s, 0.5)[0], 10.0);
}

TEST(EvalSinusoid, PhasesAtMultiplesOfPiGiveZero) {
  SinusoidSignal s;
  s.axes[0] = {{5.0, 1.0, 0.0}, {7.0, 2.0, std::numbers::pi}};
  s.axes[1] = {{3.0, 4.0, 0.0}};
  // t = 0: every argument is 0 or pi.
  EXPECT_NEAR(eval_sinusoid(s, 0.0).norm(), 0.0, 1e-14);
  // t = 2: arguments 4 pi, 3 pi, pi.
  EXPECT_NEAR(eval_sinusoid(s, 2.0).norm(), 0.0, 1e-13);
}

TEST(EvalSinusoid, BoundedByAmplitudeSum) {
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> t(0.0, 1000.0);
  for (const auto& spec : {small(), large()}) {
    const auto sig = sample_scenario(spec, kLimits, rng);
    const double cap = spec.amplitude_sum_range.hi * 120.0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 d = eval_sinusoid(sig, t(rng));
      for (int a = 0; a < 3; ++a) {
        ASSERT_LE(std::abs(d[a]), sig.amplitude_sum(a) + 1e-9);
        ASSERT_LE(std::abs(d[a]), cap + 1e-9);
      }
    }
  }
}

TEST(Recorded, WellFormedThreeRows) {
  std::istringstream is("t,fx,fy,fz\n0,1,2,3\n0.5,4,5,6\n1.0,7,8,9\n");
  const auto s = parse_recorded(is);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.force[2], Vec3(7, 8, 9));
}

TEST(Recorded, HeaderOptionalCommentsSkipped) {
  std::istringstream is("# logged at sea\n0,1,2,3\n\n1,4,5,6\n");
  EXPECT_EQ(parse_recorded(is).size(), 2u);
}

TEST(Recorded, DecreasingTimeNamesLine) {
  std::istringstream is("t,fx,fy,fz\n0,1,2,3\n1,1,2,3\n0.5,1,2,3\n");
  try {
    parse_recorded(is);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Recorded, MalformedRowsRejected) {
  std::istringstream cols("0,1,2\n1,2,3\n");
  EXPECT_THROW(parse_recorded(cols), ParseError);
  std::istringstream num("0,1,2,3\n1,x,3,4\n");
  EXPECT_THROW(parse_recorded(num), ParseError);
  std::istringstream one("0,1,2,3\n");
  EXPECT_THROW(parse_recorded(one), ParseError);
}

TEST(Recorded, WriteLoadRoundTripIsIdentity) {
  Rng rng = make_rng(6);
  const auto sig = sample_scenario(large(), kLimits, rng);
  const auto s = tabulate([&](double t) { return eval_sinusoid(sig, t); }, 0.05, 201, "x");
  std::stringstream ss;
  write_recorded(ss, s);
  const auto back = parse_recorded(ss);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.t[i], s.t[i]);
    EXPECT_EQ(back.force[i], s.force[i]);
  }
}

TEST(Recorded, InterpolationExamples) {
  RecordedSeries s;
  s.t = {0.0, 1.0, 3.0};
  s.force = {Vec3(0, 0, 0), Vec3(2, 4, -6), Vec3(10, 0, 0)};
  EXPECT_EQ(eval_recorded(s, 1.0), Vec3(2, 4, -6));
  EXPECT_EQ(eval_recorded(s, 0.5), Vec3(1, 2, -3));
  EXPECT_EQ(eval_recorded(s, 2.0), Vec3(6, 2, -3));
  EXPECT_EQ(eval_recorded(s, 99.0), Vec3(10, 0, 0));
  EXPECT_EQ(eval_recorded(s, -1.0), Vec3(0, 0, 0));
}

TEST(DisturbanceSignalVariant, DispatchesToEverySource) {
  const auto c = DisturbanceSignal::constant(Vec3(1, 2, 3));
  EXPECT_EQ(c(17.0), Vec3(1, 2, 3));
  EXPECT_EQ(DisturbanceSignal{}(0.0), Vec3::Zero());
  auto rec = std::make_shared<RecordedSeries>();
  rec->t = {0.0, 1.0};
  rec->force = {Vec3::Zero(), Vec3(4, 4, 4)};
  EXPECT_EQ(DisturbanceSignal(std::shared_ptr<const RecordedSeries>(rec))(0.25), Vec3(1, 1, 1));
}
