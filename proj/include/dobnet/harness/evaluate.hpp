/// @file evaluate.hpp
/// @brief Runs a controller on a batch of episodes and logs every step.
///
/// Episode k draws its start state and disturbance from make_rng(seed, k + 1),
/// so two methods evaluated with the same seed face identical instances.
/// Learned policies act with their mean action.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dobnet/disturbance.hpp"
#include "dobnet/env.hpp"
#include "dobnet/harness/config.hpp"
#include "dobnet/harness/records.hpp"
#include "dobnet/ndiff/checkpoint.hpp"
#include "dobnet/observer.hpp"
#include "dobnet/oracle.hpp"
#include "dobnet/policy.hpp"

namespace dobnet::harness {

enum class MethodKind { kZero, kRise, kDobc, kTrajopt, kLearned };

struct Method {
  std::string id;
  MethodKind kind = MethodKind::kZero;
  std::shared_ptr<const policy::Policy> policy;  // learned methods only
};

inline const std::vector<std::string>& classical_method_ids() {
  static const std::vector<std::string> ids = {"zero", "rise", "dobc", "trajopt"};
  return ids;
}

inline Method classical_method(const std::string& id) {
  if (id == "zero") return {id, MethodKind::kZero, nullptr};
  if (id == "rise") return {id, MethodKind::kRise, nullptr};
  if (id == "dobc") return {id, MethodKind::kDobc, nullptr};
  if (id == "trajopt") return {id, MethodKind::kTrajopt, nullptr};
  std::string known;
  for (const auto& k : classical_method_ids()) known += (known.empty() ? "" : ", ") + k;
  throw ConfigError("unknown method '" + id + "'; known: " + known +
                    " (learned methods are loaded with --checkpoint)");
}

inline Method learned_method(const ndiff::Checkpoint& ck) {
  const auto arch = policy::parse_descriptor(ck.architecture);
  auto pol = std::make_shared<policy::Policy>(arch, 0);
  ndiff::restore_checkpoint(ck, pol->params(), nullptr);
  return {arch.id, MethodKind::kLearned, std::move(pol)};
}

inline Method load_learned_method(const std::filesystem::path& path) {
  return learned_method(ndiff::load_checkpoint(path));
}

/// Where each evaluation episode's disturbance comes from.
struct ScenarioSource {
  std::string id = "none";
  std::optional<disturbance::ScenarioSpec> spec;
  std::shared_ptr<const disturbance::RecordedSeries> replay;

  static ScenarioSource simulated(const Config& cfg, const std::string& id) {
    return {id, cfg.scenario_spec(id), nullptr};
  }

  static ScenarioSource recorded(disturbance::RecordedSeries s) {
    std::string id = "replay:" + s.label;
    return {std::move(id), std::nullopt, std::make_shared<const disturbance::RecordedSeries>(std::move(s))};
  }

  disturbance::DisturbanceSignal draw(const env::PlantParams& plant, Rng& rng) const {
    if (replay) return disturbance::DisturbanceSignal(replay);
    if (!spec) return disturbance::DisturbanceSignal::constant(Vec3::Zero());
    return disturbance::DisturbanceSignal(disturbance::sample_scenario(*spec, plant.control_upper, rng));
  }
};

/// Steps `env` to the end of the episode with `controller(x, t)`; logs every row.
inline EpisodeRecord run_episode(env::Environment& env, const env::State& x0, disturbance::DisturbanceSignal signal,
                                 const std::function<Vec3(const env::State&, int)>& controller) {
  EpisodeRecord rec;
  rec.weights = env.weights();
  env.start(x0, std::move(signal));
  while (!env.done()) {
    const env::State x = env.state();
    const double t = env.time();
    const env::StepResult res = env.step(controller(x, env.steps_taken()));
    rec.push_step(t, x, res.u_exec, res.d, res.running);
    if (res.terminal) {
      rec.terminal = true;
      rec.diverged = res.diverged;
      rec.push_step(env.time(), res.next, Vec3::Zero(), env.signal()(env.time()), res.final);
    }
  }
  return rec;
}

inline EpisodeRecord evaluate_episode(const Method& method, const ScenarioSource& source, std::uint64_t seed, int k,
                                      const Config& cfg) {
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(k) + 1);
  const env::State x0 = env::reset(cfg.episode, rng);
  const disturbance::DisturbanceSignal signal = source.draw(cfg.plant, rng);
  env::Environment env(cfg.plant, cfg.weights, cfg.episode);

  EpisodeRecord rec;
  switch (method.kind) {
    case MethodKind::kZero:
      rec = run_episode(env, x0, signal, [](const env::State&, int) { return Vec3::Zero(); });
      break;
    case MethodKind::kRise: {
      observer::RiseLikeController ctl(cfg.plant, cfg.gains, cfg.episode.dt);
      ctl.reset();
      rec = run_episode(env, x0, signal, [&](const env::State& x, int) { return ctl.act(x); });
      break;
    }
    case MethodKind::kDobc: {
      observer::DobcController ctl(cfg.plant, cfg.gains, cfg.observer_gain, cfg.episode.dt);
      ctl.reset(x0);
      rec = run_episode(env, x0, signal, [&](const env::State& x, int) { return ctl.act(x); });
      break;
    }
    case MethodKind::kTrajopt: {
      const auto problem = oracle::make_problem(x0, signal, cfg.plant, cfg.weights, cfg.episode, cfg.train.gamma);
      const auto result = oracle::optimize(problem, cfg.oracle_config(), rng);
      rec = run_episode(env, x0, signal,
                        [&](const env::State&, int step) { return result.u[static_cast<std::size_t>(step)]; });
      break;
    }
    case MethodKind::kLearned: {
      if (!method.policy) throw ContractViolation("evaluate: learned method '" + method.id + "' has no policy");
      const policy::Policy& pol = *method.policy;
      policy::PolicyMemory memory = pol.initial_memory();
      rec = run_episode(env, x0, signal, [&](const env::State& x, int) {
        const policy::PolicyOutput out = pol.evaluate(x, memory, cfg.plant, cfg.normalization);
        const Vec3 u = policy::mean_action(out, cfg.plant);
        pol.advance(memory, out, x, env::clamp_control(u, cfg.plant), cfg.plant, cfg.normalization);
        return u;
      });
      break;
    }
  }
  rec.method = method.id;
  rec.scenario = source.id;
  rec.seed = seed;
  rec.episode = k;
  return rec;
}

inline std::vector<EpisodeRecord> evaluate(const Method& method, const ScenarioSource& source, int n_episodes,
                                           std::uint64_t seed, const Config& cfg) {
  if (n_episodes < 0) throw ContractViolation("evaluate: n_episodes must be >= 0");
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int k = 0; k < n_episodes; ++k) out.push_back(evaluate_episode(method, source, seed, k, cfg));
  return out;
}

}  // namespace dobnet::harness
