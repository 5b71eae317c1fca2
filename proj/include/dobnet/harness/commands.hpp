/// @file commands.hpp
/// @brief The work behind each CLI subcommand, callable without a process.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dobnet/disturbance.hpp"
#include "dobnet/text.hpp"
#include "dobnet/harness/config.hpp"
#include "dobnet/harness/evaluate.hpp"
#include "dobnet/harness/metrics.hpp"
#include "dobnet/harness/records.hpp"
#include "dobnet/ndiff/checkpoint.hpp"
#include "dobnet/policy.hpp"
#include "dobnet/trainer.hpp"

namespace dobnet::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Training curve CSV

inline constexpr const char* kCurveHeader =
    "update,env_steps,mean_episode_reward,policy_loss,value_loss,entropy,grad_norm";

inline void write_curve(std::ostream& os, const std::vector<trainer::CurveRow>& rows) {
  os << std::setprecision(17) << kCurveHeader << '\n';
  for (const auto& r : rows) {
    os << r.update_idx << ',' << r.env_steps << ',' << r.mean_episode_reward << ',' << r.policy_loss << ','
       << r.value_loss << ',' << r.entropy << ',' << r.grad_norm << '\n';
  }
}

inline std::vector<trainer::CurveRow> parse_curve(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCurveHeader) throw ParseError("expected curve header", 1);
  std::vector<trainer::CurveRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) c.push_back(tok);
    if (c.size() != 7) throw ParseError("expected 7 columns, got " + std::to_string(c.size()), lineno);
    try {
      trainer::CurveRow r;
      r.update_idx = std::stoll(c[0]);
      r.env_steps = std::stoll(c[1]);
      r.mean_episode_reward = text::to_double(c[2], lineno);
      r.policy_loss = text::to_double(c[3], lineno);
      r.value_loss = text::to_double(c[4], lineno);
      r.entropy = text::to_double(c[5], lineno);
      r.grad_norm = text::to_double(c[6], lineno);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("malformed curve row '" + line + "'", lineno);
    }
  }
  return rows;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  Config config;
  std::string arch = "dobnet-64";
  std::string scenario = "large";
  fs::path out;
  bool quiet = false;
};

struct TrainOutcome {
  trainer::TrainingResult result;
  fs::path checkpoint_path;
  fs::path curve_path;
};

inline TrainOutcome run_train(const TrainOptions& o) {
  const Config& cfg = o.config;
  cfg.validate();
  const auto arch = cfg.architecture(o.arch);
  trainer::DisturbanceSource source{cfg.scenario_spec(o.scenario)};
  policy::Policy pol(arch, cfg.train.seed);
  ensure_dir(o.out);

  trainer::TrainHooks hooks;
  if (!o.quiet) {
    hooks.on_log = [&](const trainer::CurveRow& r) {
      std::cerr << o.arch << " steps=" << r.env_steps << " reward=" << r.mean_episode_reward
                << " entropy=" << r.entropy << " |g|=" << r.grad_norm << '\n';
    };
  }
  hooks.on_event = [&](const std::string& msg) {
    if (!o.quiet) std::cerr << msg << '\n';
  };

  TrainOutcome out;
  out.result = trainer::run_training(cfg.train, cfg.env_settings(), source, pol, hooks);
  out.checkpoint_path = o.out / "checkpoint.bin";
  out.curve_path = o.out / "curve.csv";
  ndiff::save_checkpoint(out.checkpoint_path, out.result.checkpoint);
  {
    std::ofstream os(out.curve_path);
    write_curve(os, out.result.curve);
  }
  std::ofstream ini(o.out / "config.ini");
  write_config(ini, cfg);
  std::ofstream meta(o.out / "run.ini");
  meta << "[run]\ncommand = train\narch = " << o.arch << "\nscenario = " << o.scenario
       << "\nenv_steps = " << out.result.env_steps << "\nepisodes = " << out.result.episodes
       << "\ndiverged_episodes = " << out.result.diverged_episodes << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  Config config;
  std::optional<fs::path> checkpoint;
  std::string method;  // classical id when no checkpoint
  std::string scenario = "large";
  std::optional<fs::path> replay;
  int episodes = 50;
  std::uint64_t seed = 1000;
  fs::path out;
};

inline std::vector<EpisodeRecord> run_eval(const EvalOptions& o) {
  o.config.validate();
  if (o.checkpoint.has_value() == !o.method.empty()) {
    throw ConfigError("eval: pass exactly one of --checkpoint or --method");
  }
  const Method method = o.checkpoint ? load_learned_method(*o.checkpoint) : classical_method(o.method);
  const ScenarioSource source = o.replay ? ScenarioSource::recorded(disturbance::load_recorded(*o.replay))
                                         : ScenarioSource::simulated(o.config, o.scenario);
  auto records = evaluate(method, source, o.episodes, o.seed, o.config);
  ensure_dir(o.out);
  for (const auto& rec : records) {
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04d.csv", rec.episode);
    save_record(o.out / name, rec);
  }
  std::ofstream meta(o.out / "run.ini");
  meta << "[run]\ncommand = eval\nmethod = " << method.id << "\nscenario = " << source.id
       << "\nepisodes = " << o.episodes << "\nseed = " << o.seed << '\n';
  if (o.checkpoint) meta << "checkpoint = " << o.checkpoint->string() << '\n';
  return records;
}

// ---------------------------------------------------------------------------
// compare

/// Every episode_*.csv under `dir`, in name order.
inline std::vector<EpisodeRecord> load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("compare: '" + dir.string() + "' is not a run directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("episode_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("compare: no episode records in '" + dir.string() + "'");
  std::vector<EpisodeRecord> out;
  for (const auto& f : files) out.push_back(load_record(f));
  return out;
}

struct CompareOutcome {
  std::vector<ReportRow> rows;
  double worst_reward_gap = 0.0;
};

/// Groups runs by (method, scenario), checks logged rewards against
/// recomputation, and writes `<out>.csv` and `<out>.txt`.
inline CompareOutcome run_compare(const std::vector<fs::path>& runs, const fs::path& out,
                                  double reward_tolerance = 1e-9) {
  if (runs.empty()) throw ConfigError("compare: no runs given");
  std::map<std::pair<std::string, std::string>, std::vector<EpisodeRecord>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  CompareOutcome res;
  for (const auto& dir : runs) {
    for (auto& rec : load_run(dir)) {
      const double gap = reward_inconsistency(rec);
      res.worst_reward_gap = std::max(res.worst_reward_gap, gap);
      if (!(gap <= reward_tolerance)) {
        throw ContractViolation("compare: episode " + std::to_string(rec.episode) + " in '" + dir.string() +
                                "' has logged rewards off by " + std::to_string(gap) + " from recomputation");
      }
      const auto key = std::make_pair(rec.method, rec.scenario);
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(std::move(rec));
    }
  }
  std::vector<DistanceStats> stats;
  for (const auto& key : order) stats.push_back(distance_stats(groups[key]));
  res.rows = build_report(stats);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  fs::path csv = out, txt = out;
  csv += ".csv";
  txt += ".txt";
  std::ofstream c(csv);
  if (!c) throw ConfigError("compare: cannot write '" + csv.string() + "'");
  write_report_csv(c, res.rows);
  std::ofstream t(txt);
  write_report_text(t, res.rows);
  return res;
}

// ---------------------------------------------------------------------------
// gen-dist

struct GenDistOptions {
  Config config;
  std::string scenario = "large";
  std::uint64_t seed = 0;
  fs::path out;
  double duration = 0.0;  // seconds; 0 means one episode
};

inline disturbance::RecordedSeries run_gen_dist(const GenDistOptions& o) {
  o.config.validate();
  const auto spec = o.config.scenario_spec(o.scenario);
  Rng rng = make_rng(o.seed, 0);
  const disturbance::DisturbanceSignal signal =
      spec ? disturbance::DisturbanceSignal(disturbance::sample_scenario(*spec, o.config.plant.control_upper, rng))
           : disturbance::DisturbanceSignal::constant(Vec3::Zero());
  const double dt = o.config.episode.dt;
  const double duration = o.duration > 0.0 ? o.duration : o.config.episode.horizon_steps * dt;
  const auto samples = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  auto series = disturbance::tabulate(signal, dt, samples, o.scenario + "-" + std::to_string(o.seed));
  if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
  disturbance::save_recorded(o.out, series);
  return series;
}

}  // namespace dobnet::harness
