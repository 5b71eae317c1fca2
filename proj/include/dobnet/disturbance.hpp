/// @file disturbance.hpp
/// @brief Time-varying 3-axis disturbance forces: random sinusoid
/// superpositions and replay of recorded series.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dobnet/errors.hpp"
#include "dobnet/text.hpp"
#include "dobnet/types.hpp"

namespace dobnet::disturbance {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SinusoidComponent {
  double amplitude = 0.0;  // N
  double period = 1.0;     // s
  double phase = 0.0;      // rad
};

/// d_axis(t) = sum_i A_i sin(2 pi t / T_i + phi_i), independently per axis.
struct SinusoidSignal {
  std::array<std::vector<SinusoidComponent>, 3> axes;

  double amplitude_sum(int axis) const {
    double s = 0.0;
    for (const auto& c : axes[axis]) s += c.amplitude;
    return s;
  }
};

struct ScenarioSpec {
  int n_components = 3;
  Interval amplitude_sum_range{1.0, 1.2};  // fraction of the control limit
  Interval period_range{1.0, 10.0};
  Interval phase_range{0.0, 2.0 * std::numbers::pi};

  void validate() const {
    if (n_components < 1) throw ConfigError("scenario: n_components must be >= 1");
    if (!(amplitude_sum_range.lo > 0.0) || amplitude_sum_range.hi < amplitude_sum_range.lo) {
      throw ConfigError("scenario: amplitude_sum_range must satisfy 0 < lo <= hi");
    }
    if (!(period_range.lo > 0.0) || period_range.hi < period_range.lo) {
      throw ConfigError("scenario: period_range must satisfy 0 < lo <= hi");
    }
    if (phase_range.hi < phase_range.lo) throw ConfigError("scenario: phase_range must satisfy lo <= hi");
  }
};

/// Draws one realization. Per axis the component amplitudes sum to a target
/// drawn uniformly from amplitude_sum_range * limit.
inline SinusoidSignal sample_scenario(const ScenarioSpec& spec, const Vec3& limits, Rng& rng) {
  spec.validate();
  auto uniform = [&rng](Interval iv) {
    if (iv.hi == iv.lo) return iv.lo;
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  };
  SinusoidSignal sig;
  for (int axis = 0; axis < 3; ++axis) {
    const double total = uniform(spec.amplitude_sum_range) * std::abs(limits[axis]);
    std::vector<double> w(static_cast<std::size_t>(spec.n_components));
    double wsum = 0.0;
    // Weights in (0, 1]; 1 - U with U in [0, 1) keeps them strictly positive.
    for (auto& wi : w) {
      wi = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      wsum += wi;
    }
    auto& comps = sig.axes[axis];
    for (double wi : w) {
      SinusoidComponent c;
      c.amplitude = total * wi / wsum;
      c.period = uniform(spec.period_range);
      c.phase = spec.phase_range.hi > spec.phase_range.lo
                    ? std::uniform_real_distribution<double>(spec.phase_range.lo, spec.phase_range.hi)(rng)
                    : spec.phase_range.lo;
      comps.push_back(c);
    }
  }
  return sig;
}

inline Vec3 eval_sinusoid(const SinusoidSignal& sig, double t) {
  Vec3 d = Vec3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    for (const auto& c : sig.axes[axis]) {
      d[axis] += c.amplitude * std::sin(2.0 * std::numbers::pi * t / c.period + c.phase);
    }
  }
  return d;
}

struct RecordedSeries {
  std::vector<double> t;
  std::vector<Vec3> force;
  std::string label;

  std::size_t size() const { return t.size(); }
};

/// Linear interpolation on the time grid; holds the end values outside it.
inline Vec3 eval_recorded(const RecordedSeries& s, double t) {
  if (s.t.empty()) return Vec3::Zero();
  if (t <= s.t.front()) return s.force.front();
  if (t >= s.t.back()) return s.force.back();
  const auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  const auto hi = static_cast<std::size_t>(it - s.t.begin());
  const std::size_t lo = hi - 1;
  const double frac = (t - s.t[lo]) / (s.t[hi] - s.t[lo]);
  return s.force[lo] + frac * (s.force[hi] - s.force[lo]);
}

/// Parses `t,fx,fy,fz` rows. A non-numeric first line is treated as a header;
/// blank lines and lines starting with '#' are skipped.
inline RecordedSeries parse_recorded(std::istream& is, std::string label = {}) {
  RecordedSeries s;
  s.label = std::move(label);
  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  while (std::getline(is, line)) {
    ++lineno;
    const auto view = text::trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      cols.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    double vals[4];
    const bool numeric = cols.size() == 4 && text::parse_double(cols[0], vals[0]) && text::parse_double(cols[1], vals[1]) &&
                         text::parse_double(cols[2], vals[2]) && text::parse_double(cols[3], vals[3]);
    if (!numeric) {
      if (first_content && cols.size() == 4) {
        first_content = false;
        continue;  // header
      }
      if (cols.size() != 4) {
        throw ParseError("expected 4 columns t,fx,fy,fz, got " + std::to_string(cols.size()), lineno);
      }
      throw ParseError("malformed numeric value in '" + std::string(view) + "'", lineno);
    }
    first_content = false;
    if (!std::isfinite(vals[0]) || !std::isfinite(vals[1]) || !std::isfinite(vals[2]) || !std::isfinite(vals[3])) {
      throw ParseError("non-finite value", lineno);
    }
    if (!s.t.empty() && !(vals[0] > s.t.back())) {
      throw ParseError("time " + std::string(text::trim(cols[0])) + " does not increase", lineno);
    }
    s.t.push_back(vals[0]);
    s.force.emplace_back(vals[1], vals[2], vals[3]);
  }
  if (s.t.size() < 2) throw ParseError("recorded series needs at least 2 samples, got " + std::to_string(s.t.size()));
  return s;
}

inline RecordedSeries load_recorded(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open disturbance file '" + path.string() + "'");
  try {
    return parse_recorded(is, path.filename().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_recorded(std::ostream& os, const RecordedSeries& s) {
  os << "t,fx,fy,fz\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    os << s.t[i] << ',' << s.force[i][0] << ',' << s.force[i][1] << ',' << s.force[i][2] << '\n';
  }
}

inline void save_recorded(const std::filesystem::path& path, const RecordedSeries& s) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  write_recorded(os, s);
}

/// Samples a signal on a uniform grid, e.g. to export a simulated scenario.
template <typename Signal>
RecordedSeries tabulate(const Signal& signal, double dt, std::size_t samples, std::string label) {
  RecordedSeries s;
  s.label = std::move(label);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) * dt;
    s.t.push_back(t);
    s.force.push_back(signal(t));
  }
  return s;
}

/// The disturbance acting during one episode.
class DisturbanceSignal {
  struct Constant {
    Vec3 value;
  };

 public:
  DisturbanceSignal() : src_(Constant{Vec3::Zero()}) {}
  explicit DisturbanceSignal(SinusoidSignal s) : src_(std::move(s)) {}
  explicit DisturbanceSignal(std::shared_ptr<const RecordedSeries> s) : src_(std::move(s)) {}

  static DisturbanceSignal constant(const Vec3& d) { return DisturbanceSignal(Constant{d}); }

  Vec3 operator()(double t) const {
    return std::visit(
        [t](const auto& s) -> Vec3 {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Constant>) {
            return s.value;
          } else if constexpr (std::is_same_v<S, SinusoidSignal>) {
            return eval_sinusoid(s, t);
          } else {
            return eval_recorded(*s, t);
          }
        },
        src_);
  }

 private:
  explicit DisturbanceSignal(Constant c) : src_(c) {}

  std::variant<Constant, SinusoidSignal, std::shared_ptr<const RecordedSeries>> src_;
};

}  // namespace dobnet::disturbance
