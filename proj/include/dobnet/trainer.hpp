/// @file trainer.hpp
/// @brief Synchronous advantage actor-critic over lockstep environment workers.
///
/// Each update: every worker acts for t_max steps with the same parameters
/// (one batched forward per step, one column per worker), k-step returns are
/// bootstrapped from the value at the segment end, and a single backward
/// pass through the unrolled segment drives one clipped RMSprop step.
/// Hidden states are carried into the next segment detached (truncated
/// BPTT) and zeroed whenever a worker's episode ends.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dobnet/disturbance.hpp"
#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/ndiff/checkpoint.hpp"
#include "dobnet/ndiff/optim.hpp"
#include "dobnet/ndiff/tape.hpp"
#include "dobnet/policy.hpp"
#include "dobnet/types.hpp"

namespace dobnet::trainer {

using ndiff::Index;
using ndiff::Matrix;
using ndiff::Tape;
using ndiff::Var;
using ndiff::Vector;

struct TrainConfig {
  int n_workers = 16;
  int t_max = 20;
  double gamma = 0.99;
  double lr = 7e-4;
  double rms_alpha = 0.99;
  double rms_eps = 1e-8;
  double grad_clip = 0.5;
  double value_loss_coef = 0.1;
  double entropy_coef = 0.01;
  double reward_scale = 0.1;
  std::int64_t total_env_steps = 2'000'000;
  std::uint64_t seed = 0;
  int log_interval = 10;  // updates between curve rows

  void validate() const {
    if (n_workers < 1) throw ConfigError("train: n_workers must be >= 1");
    if (t_max < 1) throw ConfigError("train: t_max must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must lie in (0, 1]");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
    if (total_env_steps < 0) throw ConfigError("train: total_env_steps must be >= 0");
    if (log_interval < 1) throw ConfigError("train: log_interval must be >= 1");
    if (!(reward_scale > 0.0)) throw ConfigError("train: reward_scale must be > 0");
  }
};

struct EnvSettings {
  env::PlantParams plant;
  env::RewardWeights weights;
  env::EpisodeConfig episode;
  policy::Normalization normalization;
};

/// Where each training episode's disturbance comes from. An empty scenario
/// means no disturbance at all.
struct DisturbanceSource {
  std::optional<disturbance::ScenarioSpec> scenario;

  disturbance::DisturbanceSignal draw(const env::PlantParams& plant, Rng& rng) const {
    if (!scenario) return disturbance::DisturbanceSignal::constant(Vec3::Zero());
    return disturbance::DisturbanceSignal(disturbance::sample_scenario(*scenario, plant.control_upper, rng));
  }
};

// ---------------------------------------------------------------------------
// Returns

/// R_i = r_i + gamma R_{i+1}, with R after the last step equal to `bootstrap`
/// and reset to 0 after every terminal step.
inline std::vector<double> compute_returns(std::span<const double> rewards, const std::vector<bool>& terminal,
                                           double bootstrap, double gamma) {
  if (rewards.size() != terminal.size()) throw ContractViolation("compute_returns: rewards/terminal length mismatch");
  std::vector<double> out(rewards.size());
  double R = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    if (terminal[i]) R = 0.0;
    R = rewards[i] + gamma * R;
    out[i] = R;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segment data

/// One lockstep step of all workers. `out` refers to nodes of the segment tape.
struct SegmentStep {
  policy::GraphOutput out;
  Matrix pre_squash;            // 3 x W sampled pre-squash actions
  Vector reward;                // W, training reward (scaled, final reward folded in)
  std::vector<bool> terminal;   // W
};

struct SegmentBatch {
  std::vector<SegmentStep> steps;
  Vector bootstrap;  // W; ignored for workers whose last step was terminal

  Index workers() const { return bootstrap.size(); }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
};

/// Per-step returns for every worker: returns[t](w).
inline std::vector<Vector> segment_returns(const SegmentBatch& batch, double gamma) {
  const std::size_t T = batch.steps.size();
  const Index W = batch.workers();
  std::vector<Vector> R(T, Vector(W));
  std::vector<double> r(T);
  std::vector<bool> term(T);
  for (Index w = 0; w < W; ++w) {
    for (std::size_t t = 0; t < T; ++t) {
      r[t] = batch.steps[t].reward(w);
      term[t] = batch.steps[t].terminal[static_cast<std::size_t>(w)];
    }
    const auto ret = compute_returns(r, term, batch.bootstrap(w), gamma);
    for (std::size_t t = 0; t < T; ++t) R[t](w) = ret[t];
  }
  return R;
}

inline std::string describe_segment(const SegmentBatch& batch, const Tape& tape) {
  std::ostringstream os;
  os << "segment of " << batch.steps.size() << " steps x " << batch.workers() << " workers\n";
  for (std::size_t t = 0; t < batch.steps.size(); ++t) {
    const auto& s = batch.steps[t];
    os << "  t=" << t << " reward=" << s.reward.transpose() << "\n    value=" << tape.value(s.out.value)
       << "\n    mean=" << tape.value(s.out.mean).row(0) << "\n";
  }
  return os.str();
}

/// Builds the actor-critic loss on `tape` (batch means over steps and workers):
///   -mean(log_prob * advantage) + c_v mean((R - V)^2) - c_e entropy
/// with the advantage R - V held constant in the policy term. Returns the
/// loss node and fills the diagnostic terms of `stats`.
inline Var build_loss(Tape& tape, const SegmentBatch& batch, const TrainConfig& cfg, UpdateStats& stats) {
  if (batch.steps.empty()) throw ContractViolation("a2c: empty segment");
  const auto returns = segment_returns(batch, cfg.gamma);
  const Index W = batch.workers();
  const double n = static_cast<double>(batch.steps.size() * static_cast<std::size_t>(W));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  const Var log_std = batch.steps.front().out.log_std;
  Var log_std_b = tape.broadcast_cols(log_std, W);
  Var inv_std = tape.exp(tape.affine(log_std_b, -1.0, 0.0));

  std::optional<Var> pg_sum;
  std::optional<Var> v_sum;
  for (std::size_t t = 0; t < batch.steps.size(); ++t) {
    const auto& s = batch.steps[t];
    const Matrix& V = tape.value(s.out.value);
    Matrix adv(policy::kActionDim, W);
    for (Index w = 0; w < W; ++w) adv.col(w).setConstant(returns[t](w) - V(0, w));

    Var z = tape.mul(tape.sub(tape.constant(s.pre_squash), s.out.mean), inv_std);
    Var logp = tape.sub(tape.affine(tape.square(z), -0.5, -half_log_2pi), log_std_b);
    Var pg = tape.sum(tape.mul_const(logp, adv));
    pg_sum = pg_sum ? tape.add(*pg_sum, pg) : pg;

    Var err = tape.sub(tape.constant(Matrix(returns[t].transpose())), s.out.value);
    Var vl = tape.sum(tape.square(err));
    v_sum = v_sum ? tape.add(*v_sum, vl) : vl;
  }
  Var policy_loss = tape.affine(*pg_sum, -1.0 / n, 0.0);
  Var value_loss = tape.affine(*v_sum, 1.0 / n, 0.0);
  Var entropy = tape.affine(tape.sum(log_std), 1.0, 3.0 * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e));

  stats.policy_loss = tape.value(policy_loss)(0, 0);
  stats.value_loss = tape.value(value_loss)(0, 0);
  stats.entropy = tape.value(entropy)(0, 0);

  Var loss = tape.add(policy_loss, tape.affine(value_loss, cfg.value_loss_coef, 0.0));
  return tape.add(loss, tape.affine(entropy, -cfg.entropy_coef, 0.0));
}

/// One synchronous update from a recorded segment.
inline UpdateStats a2c_update(Tape& tape, const SegmentBatch& batch, ndiff::ParamSet& params, ndiff::RmsProp& opt,
                              const TrainConfig& cfg) {
  UpdateStats stats;
  params.zero_grads();
  Var loss = build_loss(tape, batch, cfg, stats);
  const double lv = tape.value(loss)(0, 0);
  if (!std::isfinite(lv)) {
    throw NonFiniteError("a2c: non-finite loss (" + std::to_string(lv) + ")\n" + describe_segment(batch, tape));
  }
  tape.backward(loss);
  try {
    stats.grad_norm = ndiff::clip_grad_norm(params, cfg.grad_clip);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string(e.what()) + "\n" + describe_segment(batch, tape));
  }
  opt.step(params);
  return stats;
}

// ---------------------------------------------------------------------------
// Training loop

struct CurveRow {
  std::int64_t update_idx = 0;
  std::int64_t env_steps = 0;
  double mean_episode_reward = std::numeric_limits<double>::quiet_NaN();
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
};

struct TrainingResult {
  ndiff::Checkpoint checkpoint;
  std::vector<CurveRow> curve;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t diverged_episodes = 0;
};

struct TrainHooks {
  std::function<void(const CurveRow&)> on_log;
  std::function<void(const std::string&)> on_event;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, EnvSettings settings, DisturbanceSource source, policy::Policy& policy)
      : cfg_(cfg), settings_(std::move(settings)), source_(std::move(source)), policy_(policy) {
    cfg_.validate();
    opt_ = ndiff::RmsProp(policy_.params(), {cfg_.lr, cfg_.rms_alpha, cfg_.rms_eps});
    for (int w = 0; w < cfg_.n_workers; ++w) {
      workers_.push_back(Worker{env::Environment(settings_.plant, settings_.weights, settings_.episode),
                                make_rng(cfg_.seed, static_cast<std::uint64_t>(w) + 1),
                                policy::HistoryBuffer(policy_.uses_history() ? policy_.config().history_length : 0)});
    }
    for (auto& wk : workers_) start_episode(wk);
    for (auto h : policy_.hidden_sizes()) hidden_.push_back(Matrix::Zero(h, cfg_.n_workers));
  }

  ndiff::RmsProp& optimizer() { return opt_; }

  TrainingResult run(const TrainHooks& hooks = {}) {
    TrainingResult res;
    const std::int64_t per_update = static_cast<std::int64_t>(cfg_.n_workers) * cfg_.t_max;
    const std::int64_t updates = (cfg_.total_env_steps + per_update - 1) / per_update;
    ndiff::Tape tape(policy_.params());
    CurveRow pending;
    double reward_sum = 0.0;
    std::int64_t reward_count = 0;
    double last_mean_reward = std::numeric_limits<double>::quiet_NaN();
    int since_log = 0;

    for (std::int64_t u = 0; u < updates; ++u) {
      tape.reset();
      SegmentBatch batch = rollout(tape, res, reward_sum, reward_count, hooks);
      const UpdateStats st = a2c_update(tape, batch, policy_.params(), opt_, cfg_);
      res.env_steps += per_update;
      pending.policy_loss += st.policy_loss;
      pending.value_loss += st.value_loss;
      pending.entropy += st.entropy;
      pending.grad_norm += st.grad_norm;
      ++since_log;
      if (since_log == cfg_.log_interval || u + 1 == updates) {
        CurveRow row;
        row.update_idx = u + 1;
        row.env_steps = res.env_steps;
        if (reward_count > 0) last_mean_reward = reward_sum / static_cast<double>(reward_count);
        row.mean_episode_reward = last_mean_reward;
        row.policy_loss = pending.policy_loss / since_log;
        row.value_loss = pending.value_loss / since_log;
        row.entropy = pending.entropy / since_log;
        row.grad_norm = pending.grad_norm / since_log;
        res.curve.push_back(row);
        if (hooks.on_log) hooks.on_log(row);
        pending = {};
        reward_sum = 0.0;
        reward_count = 0;
        since_log = 0;
      }
    }
    res.checkpoint = ndiff::make_checkpoint(policy_.config().descriptor(), policy_.params(), &opt_);
    return res;
  }

 private:
  struct Worker {
    env::Environment env;
    Rng rng;
    policy::HistoryBuffer history;
    Vec3 u_prev = Vec3::Zero();
    double episode_reward = 0.0;
  };

  void start_episode(Worker& wk) {
    wk.env.reset(wk.rng, source_.draw(settings_.plant, wk.rng));
    wk.history.clear();
    wk.u_prev = Vec3::Zero();
    wk.episode_reward = 0.0;
  }

  policy::BatchInput gather_input() const {
    const Index W = cfg_.n_workers;
    policy::BatchInput in;
    in.x.resize(policy::kStateDim, W);
    in.u_prev.resize(policy::kActionDim, W);
    if (policy_.uses_history()) in.history.resize(policy_.history_rows(), W);
    for (Index w = 0; w < W; ++w) {
      const auto& wk = workers_[static_cast<std::size_t>(w)];
      in.x.col(w) = policy::normalize_state(wk.env.state(), settings_.normalization);
      in.u_prev.col(w) = policy::normalize_action(wk.u_prev, settings_.plant);
      if (policy_.uses_history()) in.history.col(w) = wk.history.flatten(policy_.config().include_actions);
    }
    return in;
  }

  SegmentBatch rollout(Tape& tape, TrainingResult& res, double& reward_sum, std::int64_t& reward_count,
                       const TrainHooks& hooks) {
    const Index W = cfg_.n_workers;
    SegmentBatch batch;
    std::vector<Var> hidden;
    for (const auto& h : hidden_) hidden.push_back(tape.constant(h));

    for (int t = 0; t < cfg_.t_max; ++t) {
      const policy::BatchInput in = gather_input();
      SegmentStep step;
      step.out = policy_.forward(tape, in, hidden);
      step.pre_squash.resize(policy::kActionDim, W);
      step.reward.resize(W);
      step.terminal.assign(static_cast<std::size_t>(W), false);
      const Matrix& mean = tape.value(step.out.mean);
      const Vec3 log_std = tape.value(step.out.log_std).col(0);
      Matrix keep = Matrix::Ones(1, W);
      bool any_reset = false;

      for (Index w = 0; w < W; ++w) {
        auto& wk = workers_[static_cast<std::size_t>(w)];
        const policy::SampledAction a = policy::sample_action(mean.col(w), log_std, settings_.plant, wk.rng);
        const env::State before = wk.env.state();
        const env::StepResult r = wk.env.step(a.u_exec);
        step.pre_squash.col(w) = a.pre_squash;
        double reward = r.running;
        if (r.terminal) reward += cfg_.gamma * r.final;
        step.reward(w) = cfg_.reward_scale * reward;
        step.terminal[static_cast<std::size_t>(w)] = r.terminal;
        wk.episode_reward += r.reward();
        if (policy_.uses_history()) {
          wk.history.push(policy::normalize_state(before, settings_.normalization),
                          policy::normalize_action(r.u_exec, settings_.plant));
        }
        wk.u_prev = r.u_exec;
        if (r.terminal) {
          ++res.episodes;
          reward_sum += wk.episode_reward;
          ++reward_count;
          if (r.diverged) {
            ++res.diverged_episodes;
            if (hooks.on_event) hooks.on_event("worker " + std::to_string(w) + " diverged; episode reset");
          }
          start_episode(wk);
          keep(0, w) = 0.0;
          any_reset = true;
        }
      }

      hidden = step.out.hidden;
      if (any_reset) {
        for (auto& h : hidden) {
          const Index rows = tape.value(h).rows();
          h = tape.mul_const(h, keep.replicate(rows, 1));
        }
      }
      batch.steps.push_back(std::move(step));
    }

    // Bootstrap from the value of the state reached at the segment end.
    const policy::BatchInput in = gather_input();
    const policy::GraphOutput tail = policy_.forward(tape, in, hidden);
    batch.bootstrap = tape.value(tail.value).row(0).transpose();
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden_[i] = tape.value(hidden[i]);
    return batch;
  }

  TrainConfig cfg_;
  EnvSettings settings_;
  DisturbanceSource source_;
  policy::Policy& policy_;
  ndiff::RmsProp opt_;
  std::vector<Worker> workers_;
  std::vector<Matrix> hidden_;
};

inline TrainingResult run_training(const TrainConfig& cfg, const EnvSettings& settings,
                                   const DisturbanceSource& source, policy::Policy& policy,
                                   const TrainHooks& hooks = {}) {
  Trainer trainer(cfg, settings, source, policy);
  return trainer.run(hooks);
}

}  // namespace dobnet::trainer
