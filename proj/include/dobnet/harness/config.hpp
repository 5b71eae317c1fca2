/// @file config.hpp
/// @brief Experiment configuration: INI sections, one per module.
///
/// Every key has a default; `dump_defaults` prints them all. Unknown sections
/// or keys are rejected with the accepted alternatives listed. Vector-valued
/// keys take either one number (broadcast to all axes) or three separated by
/// commas.

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dobnet/disturbance.hpp"
#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/observer.hpp"
#include "dobnet/oracle.hpp"
#include "dobnet/policy.hpp"
#include "dobnet/trainer.hpp"

namespace dobnet::harness {

struct ScenarioRanges {
  int n_components = 3;
  disturbance::Interval small{1.0, 1.2};
  disturbance::Interval large{1.3, 1.5};
  disturbance::Interval period{1.0, 10.0};
};

struct EvalSettings {
  int episodes = 50;
  std::uint64_t seed = 1000;
};

struct Config {
  env::PlantParams plant;
  env::RewardWeights weights;
  env::EpisodeConfig episode;
  ScenarioRanges scenarios;
  double observer_gain = 2.0;
  observer::FeedbackGains gains;
  policy::Normalization normalization;
  int history_length = 10;
  double log_std_init = 0.0;
  trainer::TrainConfig train;
  oracle::OracleConfig oracle;
  EvalSettings eval;

  void validate() const {
    plant.validate();
    episode.validate();
    gains.validate();
    train.validate();
    if (!(observer_gain > 0.0 && observer_gain * episode.dt < 1.0)) {
      throw ConfigError("observer.gain must satisfy 0 < gain * env.dt < 1");
    }
    if (history_length < 1) throw ConfigError("policy.history_length must be >= 1");
    if (!(log_std_init >= policy::kLogStdMin && log_std_init <= policy::kLogStdMax)) {
      throw ConfigError("policy.log_std_init must lie in [-5, 1]");
    }
    if (!(normalization.position > 0.0 && normalization.velocity > 0.0)) {
      throw ConfigError("policy scales must be > 0");
    }
    if (oracle.iterations < 0 || oracle.restarts < 0) throw ConfigError("oracle iterations/restarts must be >= 0");
    if (!(oracle.backtrack > 0.0 && oracle.backtrack < 1.0)) throw ConfigError("oracle.backtrack must lie in (0, 1)");
    if (eval.episodes < 0) throw ConfigError("eval.episodes must be >= 0");
    scenario_spec("small").value().validate();
    scenario_spec("large").value().validate();
  }

  trainer::EnvSettings env_settings() const { return {plant, weights, episode, normalization}; }

  /// Scenario ids: "none" (d = 0), "small", "large".
  std::optional<disturbance::ScenarioSpec> scenario_spec(const std::string& id) const {
    if (id == "none") return std::nullopt;
    disturbance::ScenarioSpec s;
    s.n_components = scenarios.n_components;
    s.period_range = scenarios.period;
    if (id == "small") {
      s.amplitude_sum_range = scenarios.small;
    } else if (id == "large") {
      s.amplitude_sum_range = scenarios.large;
    } else {
      throw ConfigError("unknown scenario '" + id + "'; known: none, small, large");
    }
    return s;
  }

  policy::ArchitectureConfig architecture(const std::string& id) const {
    auto a = policy::architecture_from_id(id);
    a.history_length = history_length;
    a.log_std_init = log_std_init;
    return a;
  }

  oracle::OracleConfig oracle_config() const {
    oracle::OracleConfig o = oracle;
    o.gamma = train.gamma;
    o.warm_gains = gains;
    o.warm_observer_gain = observer_gain;
    return o;
  }
};

inline const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids = {"none", "small", "large"};
  return ids;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt(const Vec3& v) {
  if (v[0] == v[1] && v[1] == v[2]) return fmt(v[0]);
  return fmt(v[0]) + "," + fmt(v[1]) + "," + fmt(v[2]);
}

inline double parse_double(const std::string& key, const std::string& text) {
  std::string t = text;
  t.erase(0, t.find_first_not_of(" \t"));
  t.erase(t.find_last_not_of(" \t") + 1);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v != static_cast<double>(static_cast<std::int64_t>(v))) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
  }
  return static_cast<std::int64_t>(v);
}

inline Vec3 parse_vec3(const std::string& key, const std::string& text) {
  std::vector<double> parts;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) parts.push_back(parse_double(key, tok));
  if (parts.size() == 1) return Vec3::Constant(parts[0]);
  if (parts.size() == 3) return Vec3(parts[0], parts[1], parts[2]);
  throw ConfigError("config key '" + key + "': expected 1 or 3 comma-separated numbers, got '" + text + "'");
}

struct Key {
  std::string section;
  std::string name;
  std::function<std::string()> get;
  std::function<void(const std::string& full, const std::string& text)> set;
};

inline Key real(std::string sec, std::string name, double& ref) {
  return {std::move(sec), std::move(name), [&ref] { return fmt(ref); },
          [&ref](const std::string& k, const std::string& t) { ref = parse_double(k, t); }};
}

inline Key vec(std::string sec, std::string name, Vec3& ref) {
  return {std::move(sec), std::move(name), [&ref] { return fmt(ref); },
          [&ref](const std::string& k, const std::string& t) { ref = parse_vec3(k, t); }};
}

template <typename I>
Key integer(std::string sec, std::string name, I& ref) {
  return {std::move(sec), std::move(name), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& k, const std::string& t) { ref = static_cast<I>(parse_int(k, t)); }};
}

inline std::vector<Key> keys(Config& c) {
  return {
      real("env", "mass", c.plant.mass),
      vec("env", "drag_linear", c.plant.drag_linear),
      vec("env", "drag_quadratic", c.plant.drag_quadratic),
      vec("env", "gravity_buoyancy", c.plant.gravity_buoyancy),
      vec("env", "control_upper", c.plant.control_upper),
      vec("env", "control_lower", c.plant.control_lower),
      real("env", "w_pos", c.weights.w_pos),
      real("env", "w_vel", c.weights.w_vel),
      real("env", "w_ctrl", c.weights.w_ctrl),
      integer("env", "horizon_steps", c.episode.horizon_steps),
      real("env", "dt", c.episode.dt),
      vec("env", "start_position_box", c.episode.start_position_box),
      vec("env", "start_velocity_box", c.episode.start_velocity_box),
      real("env", "divergence_radius", c.episode.divergence_radius),
      integer("disturbance", "n_components", c.scenarios.n_components),
      real("disturbance", "small_amplitude_lo", c.scenarios.small.lo),
      real("disturbance", "small_amplitude_hi", c.scenarios.small.hi),
      real("disturbance", "large_amplitude_lo", c.scenarios.large.lo),
      real("disturbance", "large_amplitude_hi", c.scenarios.large.hi),
      real("disturbance", "period_lo", c.scenarios.period.lo),
      real("disturbance", "period_hi", c.scenarios.period.hi),
      real("observer", "gain", c.observer_gain),
      vec("observer", "kp", c.gains.kp),
      vec("observer", "kd", c.gains.kd),
      vec("observer", "ki", c.gains.ki),
      real("observer", "integral_bound", c.gains.integral_bound),
      real("policy", "position_scale", c.normalization.position),
      real("policy", "velocity_scale", c.normalization.velocity),
      integer("policy", "history_length", c.history_length),
      real("policy", "log_std_init", c.log_std_init),
      integer("train", "n_workers", c.train.n_workers),
      integer("train", "t_max", c.train.t_max),
      real("train", "gamma", c.train.gamma),
      real("train", "lr", c.train.lr),
      real("train", "rms_alpha", c.train.rms_alpha),
      real("train", "rms_eps", c.train.rms_eps),
      real("train", "grad_clip", c.train.grad_clip),
      real("train", "value_loss_coef", c.train.value_loss_coef),
      real("train", "entropy_coef", c.train.entropy_coef),
      real("train", "reward_scale", c.train.reward_scale),
      integer("train", "total_env_steps", c.train.total_env_steps),
      integer("train", "seed", c.train.seed),
      integer("train", "log_interval", c.train.log_interval),
      integer("oracle", "iterations", c.oracle.iterations),
      integer("oracle", "restarts", c.oracle.restarts),
      real("oracle", "initial_step", c.oracle.initial_step),
      real("oracle", "backtrack", c.oracle.backtrack),
      real("oracle", "armijo", c.oracle.armijo),
      integer("oracle", "max_backtracks", c.oracle.max_backtracks),
      integer("eval", "episodes", c.eval.episodes),
      integer("eval", "seed", c.eval.seed),
  };
}

}  // namespace detail

/// Every accepted key as "section.name".
inline std::vector<std::string> accepted_keys() {
  Config c;
  std::vector<std::string> out;
  for (const auto& k : detail::keys(c)) out.push_back(k.section + "." + k.name);
  return out;
}

inline void write_config(std::ostream& os, const Config& cfg) {
  Config c = cfg;
  std::string section;
  for (const auto& k : detail::keys(c)) {
    if (k.section != section) {
      os << (section.empty() ? "" : "\n") << "[" << k.section << "]\n";
      section = k.section;
    }
    os << k.name << " = " << k.get() << "\n";
  }
}

inline std::string dump_defaults() {
  std::ostringstream os;
  write_config(os, Config{});
  return os.str();
}

/// Applies the keys found in `is` on top of `base`.
inline Config parse_config(std::istream& is, Config base = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  auto defs = detail::keys(base);
  auto accepted = [&] {
    std::string s;
    for (const auto& k : defs) s += (s.empty() ? "" : ", ") + k.section + "." + k.name;
    return s;
  };
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' is outside any section; accepted keys: " + accepted());
    }
    for (const auto& [name, node] : body) {
      const std::string full = section + "." + name;
      auto it = std::find_if(defs.begin(), defs.end(),
                             [&](const detail::Key& k) { return k.section == section && k.name == name; });
      if (it == defs.end()) throw ConfigError("unknown config key '" + full + "'; accepted keys: " + accepted());
      it->set(full, node.data());
    }
  }
  base.validate();
  return base;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(is);
}

}  // namespace dobnet::harness
