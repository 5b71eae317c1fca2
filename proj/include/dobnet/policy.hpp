/// @file policy.hpp
/// @brief Learned actor-critic architectures sharing one act/evaluate surface.
///
///   a2c        MLP on x_t
///   hwa2c-x    MLP on [x_{t-N} .. x_{t-1}, x_t]
///   hwa2c-xu   MLP on [(x, u)_{t-N} .. (x, u)_{t-1}, x_t]
///   ra2c-x     GRU on x_t, heads on [h, x_t]
///   ra2c-xu    GRU on [x_t, u_{t-1}], heads on [h, x_t]
///   dobnet-n   GRU1 on [x_t, u_{t-1}] -> FC -> embedding (width n) -> GRU2,
///              heads on [h2, x_t]
///
/// Every network reads normalized inputs: q / 2 m, q' / 2 m/s, u / limit.
/// Actions follow a diagonal Gaussian in pre-squash space with a learned,
/// state-independent log standard deviation; executed controls are
/// limit * tanh(a), clamped.

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/ndiff/layers.hpp"
#include "dobnet/ndiff/param_set.hpp"
#include "dobnet/ndiff/tape.hpp"
#include "dobnet/types.hpp"

namespace dobnet::policy {

using ndiff::Index;
using ndiff::Matrix;
using ndiff::Tape;
using ndiff::Var;
using ndiff::Vector;

inline constexpr Index kStateDim = 6;
inline constexpr Index kActionDim = 3;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;
inline constexpr double kActorOutInitScale = 0.01;

enum class ArchKind { kFeedforward, kHistory, kRecurrent, kDobNet };

inline const std::vector<std::string>& learned_arch_ids() {
  static const std::vector<std::string> ids = {"a2c",     "hwa2c-x",  "hwa2c-xu", "ra2c-x",
                                               "ra2c-xu", "dobnet-3", "dobnet-64"};
  return ids;
}

struct ArchitectureConfig {
  std::string id = "dobnet-64";
  ArchKind kind = ArchKind::kDobNet;
  bool include_actions = true;
  int history_length = 10;
  std::vector<Index> mlp_widths{64, 64};  // feedforward / history actor and critic towers
  Index gru1_hidden = 64;                 // also the recurrent baselines' GRU
  std::vector<Index> fc_widths{64};       // hidden FC layers before the embedding layer
  Index embed_dim = 64;
  Index gru2_hidden = 64;
  std::vector<Index> head_widths{64};     // actor / critic heads of recurrent nets
  double log_std_init = 0.0;

  void validate() const {
    auto positive = [](const std::vector<Index>& w) {
      for (Index v : w) {
        if (v < 1) return false;
      }
      return true;
    };
    if (gru1_hidden < 1 || gru2_hidden < 1 || embed_dim < 1 || history_length < 0 || !positive(mlp_widths) ||
        !positive(fc_widths) || !positive(head_widths)) {
      throw ConfigError("architecture '" + id + "': all widths must be >= 1");
    }
  }

  /// Compact self-describing string stored in checkpoints.
  std::string descriptor() const {
    auto list = [](const std::vector<Index>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    std::ostringstream os;
    os << "id=" << id << ";history=" << history_length << ";mlp=" << list(mlp_widths) << ";gru1=" << gru1_hidden
       << ";fc=" << list(fc_widths) << ";embed=" << embed_dim << ";gru2=" << gru2_hidden
       << ";head=" << list(head_widths);
    return os.str();
  }
};

inline std::string known_ids_message() {
  std::string s;
  for (const auto& id : learned_arch_ids()) s += (s.empty() ? "" : ", ") + id;
  return s;
}

/// Default configuration for one of the learned method ids.
inline ArchitectureConfig architecture_from_id(const std::string& id) {
  ArchitectureConfig c;
  c.id = id;
  if (id == "a2c") {
    c.kind = ArchKind::kFeedforward;
    c.include_actions = false;
  } else if (id == "hwa2c-x" || id == "hwa2c-xu") {
    c.kind = ArchKind::kHistory;
    c.include_actions = id == "hwa2c-xu";
  } else if (id == "ra2c-x" || id == "ra2c-xu") {
    c.kind = ArchKind::kRecurrent;
    c.include_actions = id == "ra2c-xu";
  } else if (id == "dobnet-3" || id == "dobnet-64") {
    c.kind = ArchKind::kDobNet;
    c.include_actions = true;
    c.embed_dim = id == "dobnet-3" ? 3 : 64;
  } else {
    throw ConfigError("unknown architecture '" + id + "'; known: " + known_ids_message());
  }
  return c;
}

inline ArchitectureConfig parse_descriptor(const std::string& desc) {
  std::string id;
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream is(desc);
  std::string item;
  while (std::getline(is, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw LoadError("malformed architecture descriptor '" + desc + "'");
    kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  auto list = [](const std::string& s) {
    std::vector<Index> v;
    std::istringstream ls(s);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      if (!tok.empty()) v.push_back(std::stol(tok));
    }
    return v;
  };
  ArchitectureConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "id") c = architecture_from_id(v);
  }
  try {
    for (const auto& [k, v] : kv) {
      if (k == "history") c.history_length = std::stoi(v);
      else if (k == "mlp") c.mlp_widths = list(v);
      else if (k == "gru1") c.gru1_hidden = std::stol(v);
      else if (k == "fc") c.fc_widths = list(v);
      else if (k == "embed") c.embed_dim = std::stol(v);
      else if (k == "gru2") c.gru2_hidden = std::stol(v);
      else if (k == "head") c.head_widths = list(v);
      else if (k != "id") throw LoadError("unknown architecture descriptor field '" + k + "'");
    }
  } catch (const std::logic_error& e) {
    throw LoadError("malformed architecture descriptor '" + desc + "': " + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Normalization and the history window

struct Normalization {
  double position = 2.0;
  double velocity = 2.0;
};

inline Vector normalize_state(const env::State& x, const Normalization& n) {
  Vector v(kStateDim);
  v << x.q / n.position, x.qdot / n.velocity;
  return v;
}

inline Vec3 normalize_action(const Vec3& u, const env::PlantParams& p) {
  Vec3 a;
  for (int i = 0; i < 3; ++i) a[i] = u[i] >= 0.0 ? u[i] / p.control_upper[i] : -u[i] / p.control_lower[i];
  return a;
}

/// The N most recent (state, action) pairs, oldest first, zero padded.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int length = 10) : length_(length) {}

  int capacity() const { return length_; }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  void push(const Vector& x_norm, const Vec3& u_norm) {
    if (length_ == 0) return;
    if (static_cast<int>(entries_.size()) == length_) entries_.pop_front();
    entries_.push_back({x_norm, u_norm});
  }

  static Index entry_width(bool include_actions) { return include_actions ? kStateDim + kActionDim : kStateDim; }

  Vector flatten(bool include_actions) const {
    const Index w = entry_width(include_actions);
    Vector out = Vector::Zero(w * length_);
    const int pad = length_ - static_cast<int>(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Index off = (pad + static_cast<Index>(i)) * w;
      out.segment(off, kStateDim) = entries_[i].x;
      if (include_actions) out.segment(off + kStateDim, kActionDim) = entries_[i].u;
    }
    return out;
  }

 private:
  struct Entry {
    Vector x;
    Vec3 u;
  };
  int length_;
  std::deque<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Outputs

/// Network inputs for a batch of B workers, one column each (already normalized).
struct BatchInput {
  Matrix x;        // 6 x B
  Matrix u_prev;   // 3 x B
  Matrix history;  // (N * entry width) x B, history architectures only
};

struct GraphOutput {
  Var mean;     // 3 x B
  Var log_std;  // 3 x 1, clamped
  Var value;    // 1 x B
  std::vector<Var> hidden;
};

struct PolicyOutput {
  Vec3 action_mean = Vec3::Zero();
  Vec3 action_log_std = Vec3::Zero();
  double value = 0.0;
  std::vector<Vector> hidden_next;
};

/// Recurrent hidden state and history window of one worker.
struct PolicyMemory {
  std::vector<Vector> hidden;
  HistoryBuffer history;
  Vec3 u_prev = Vec3::Zero();  // last executed control, N
};

// ---------------------------------------------------------------------------

class Policy {
 public:
  Policy(ArchitectureConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = make_rng(init_seed, 0x5eed);
    using ndiff::Activation;
    using ndiff::Dense;
    using ndiff::GruCell;
    switch (cfg_.kind) {
      case ArchKind::kFeedforward:
      case ArchKind::kHistory: {
        Index in = kStateDim;
        if (cfg_.kind == ArchKind::kHistory) {
          in += HistoryBuffer::entry_width(cfg_.include_actions) * cfg_.history_length;
        }
        build_heads(in, cfg_.mlp_widths, rng);
        break;
      }
      case ArchKind::kRecurrent: {
        const Index in = cfg_.include_actions ? kStateDim + kActionDim : kStateDim;
        gru1_ = GruCell::create(params_, "gru", in, cfg_.gru1_hidden, rng);
        build_heads(cfg_.gru1_hidden + kStateDim, cfg_.head_widths, rng);
        break;
      }
      case ArchKind::kDobNet: {
        gru1_ = GruCell::create(params_, "gru1", kStateDim + kActionDim, cfg_.gru1_hidden, rng);
        Index in = cfg_.gru1_hidden;
        for (std::size_t i = 0; i < cfg_.fc_widths.size(); ++i) {
          trunk_.push_back(
              Dense::create(params_, "fc" + std::to_string(i), in, cfg_.fc_widths[i], Activation::kTanh, rng));
          in = cfg_.fc_widths[i];
        }
        trunk_.push_back(Dense::create(params_, "embed", in, cfg_.embed_dim, Activation::kTanh, rng));
        gru2_ = GruCell::create(params_, "gru2", cfg_.embed_dim, cfg_.gru2_hidden, rng);
        build_heads(cfg_.gru2_hidden + kStateDim, cfg_.head_widths, rng);
        break;
      }
    }
    // Start close to zero control.
    params_.block(actor_.back().weight).value *= kActorOutInitScale;
    log_std_ = params_.add("log_std", kActionDim, 1);
    params_.block(log_std_).value.setConstant(cfg_.log_std_init);
    params_.freeze();
  }

  const ArchitectureConfig& config() const { return cfg_; }
  ndiff::ParamSet& params() { return params_; }
  const ndiff::ParamSet& params() const { return params_; }
  std::size_t log_std_block() const { return log_std_; }

  bool recurrent() const { return cfg_.kind == ArchKind::kRecurrent || cfg_.kind == ArchKind::kDobNet; }
  bool uses_history() const { return cfg_.kind == ArchKind::kHistory; }

  std::vector<Index> hidden_sizes() const {
    switch (cfg_.kind) {
      case ArchKind::kRecurrent:
        return {cfg_.gru1_hidden};
      case ArchKind::kDobNet:
        return {cfg_.gru1_hidden, cfg_.gru2_hidden};
      default:
        return {};
    }
  }

  Index history_rows() const {
    return uses_history() ? HistoryBuffer::entry_width(cfg_.include_actions) * cfg_.history_length : 0;
  }

  /// Parameter count implied by the configuration.
  static std::size_t expected_parameter_count(const ArchitectureConfig& c) {
    using ndiff::Dense;
    using ndiff::GruCell;
    std::size_t n = kActionDim;  // log_std
    auto heads = [&](Index in, const std::vector<Index>& widths) {
      std::size_t h = 0;
      for (int k = 0; k < 2; ++k) {
        Index w = in;
        for (Index hw : widths) {
          h += Dense::parameter_count(w, hw);
          w = hw;
        }
        h += Dense::parameter_count(w, k == 0 ? kActionDim : 1);
      }
      return h;
    };
    switch (c.kind) {
      case ArchKind::kFeedforward:
      case ArchKind::kHistory: {
        Index in = kStateDim;
        if (c.kind == ArchKind::kHistory) in += HistoryBuffer::entry_width(c.include_actions) * c.history_length;
        n += heads(in, c.mlp_widths);
        break;
      }
      case ArchKind::kRecurrent:
        n += GruCell::parameter_count(c.include_actions ? kStateDim + kActionDim : kStateDim, c.gru1_hidden);
        n += heads(c.gru1_hidden + kStateDim, c.head_widths);
        break;
      case ArchKind::kDobNet: {
        n += GruCell::parameter_count(kStateDim + kActionDim, c.gru1_hidden);
        Index in = c.gru1_hidden;
        for (Index w : c.fc_widths) {
          n += Dense::parameter_count(in, w);
          in = w;
        }
        n += Dense::parameter_count(in, c.embed_dim);
        n += GruCell::parameter_count(c.embed_dim, c.gru2_hidden);
        n += heads(c.gru2_hidden + kStateDim, c.head_widths);
        break;
      }
    }
    return n;
  }

  /// Records one batched step on `tape`. `hidden` holds one (size x B) node
  /// per recurrent layer (empty for feedforward architectures).
  GraphOutput forward(Tape& tape, const BatchInput& in, const std::vector<Var>& hidden) const {
    const Index batch = in.x.cols();
    if (in.x.rows() != kStateDim) {
      throw ContractViolation("Policy::forward: state input " + ndiff::shape_str(in.x) + ", expected 6 rows");
    }
    if (hidden.size() != hidden_sizes().size()) {
      throw ContractViolation("Policy::forward: architecture '" + cfg_.id + "' expects " +
                              std::to_string(hidden_sizes().size()) + " hidden states, got " +
                              std::to_string(hidden.size()));
    }
    Var x = tape.constant(in.x);
    switch (cfg_.kind) {
      case ArchKind::kFeedforward:
        return feedforward_graph(tape, x);
      case ArchKind::kHistory:
        return history_graph(tape, in, x, batch);
      case ArchKind::kRecurrent:
        return recurrent_graph(tape, in, x, hidden[0]);
      case ArchKind::kDobNet:
        return dobnet_graph(tape, in, x, hidden[0], hidden[1]);
    }
    throw ContractViolation("Policy::forward: unknown architecture kind");
  }

  PolicyMemory initial_memory() const {
    PolicyMemory m;
    for (Index h : hidden_sizes()) m.hidden.push_back(Vector::Zero(h));
    m.history = HistoryBuffer(uses_history() ? cfg_.history_length : 0);
    return m;
  }

  /// Single-sample evaluation. Reads but does not modify `memory`.
  PolicyOutput evaluate(const env::State& x, const PolicyMemory& memory, const env::PlantParams& limits,
                        const Normalization& norm = {}) const {
    Tape tape(params_);
    BatchInput in;
    in.x = normalize_state(x, norm);
    in.u_prev = Matrix(normalize_action(memory.u_prev, limits));
    if (uses_history()) in.history = memory.history.flatten(cfg_.include_actions);
    std::vector<Var> hidden;
    for (const auto& h : memory.hidden) hidden.push_back(tape.constant(h));
    const GraphOutput g = forward(tape, in, hidden);
    PolicyOutput out;
    out.action_mean = tape.value(g.mean).col(0);
    out.action_log_std = tape.value(g.log_std).col(0);
    out.value = tape.value(g.value)(0, 0);
    for (Var h : g.hidden) out.hidden_next.push_back(tape.value(h).col(0));
    return out;
  }

  /// Advances `memory` after `u_exec` was applied in state `x`.
  void advance(PolicyMemory& memory, const PolicyOutput& out, const env::State& x, const Vec3& u_exec,
               const env::PlantParams& limits, const Normalization& norm = {}) const {
    memory.hidden = out.hidden_next;
    const Vec3 u_norm = normalize_action(u_exec, limits);
    if (uses_history()) memory.history.push(normalize_state(x, norm), u_norm);
    memory.u_prev = u_exec;
  }

 private:
  template <typename R>
  void build_heads(Index in, const std::vector<Index>& widths, R& rng) {
    using ndiff::Activation;
    using ndiff::Dense;
    Index a = in;
    Index c = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      actor_.push_back(Dense::create(params_, "actor" + std::to_string(i), a, widths[i],
                                     Activation::kTanh, rng));
      critic_.push_back(Dense::create(params_, "critic" + std::to_string(i), c, widths[i],
                                      Activation::kTanh, rng));
      a = c = widths[i];
    }
    actor_.push_back(Dense::create(params_, "actor.out", a, kActionDim, Activation::kNone, rng));
    critic_.push_back(Dense::create(params_, "critic.out", c, 1, Activation::kNone, rng));
  }

  static Var run_stack(Tape& tape, const std::vector<ndiff::Dense>& layers, Var v) {
    for (const auto& l : layers) v = ndiff::dense_forward(tape, l, v);
    return v;
  }

  GraphOutput heads(Tape& tape, Var features) const {
    GraphOutput g;
    g.mean = run_stack(tape, actor_, features);
    g.value = run_stack(tape, critic_, features);
    g.log_std = tape.clamp(tape.param(log_std_), kLogStdMin, kLogStdMax);
    return g;
  }

  GraphOutput feedforward_graph(Tape& tape, Var x) const {
    Var f = run_stack(tape, trunk_, x);
    return heads(tape, f);
  }

  GraphOutput history_graph(Tape& tape, const BatchInput& in, Var x, Index batch) const {
    if (in.history.rows() != history_rows() || in.history.cols() != batch) {
      throw ContractViolation("Policy::forward: history input " + ndiff::shape_str(in.history) + ", expected " +
                              ndiff::shape_str(history_rows(), batch));
    }
    Var f = run_stack(tape, trunk_, tape.concat(tape.constant(in.history), x));
    return heads(tape, f);
  }

  Var action_input(Tape& tape, const BatchInput& in, Var x) const {
    if (in.u_prev.rows() != kActionDim || in.u_prev.cols() != in.x.cols()) {
      throw ContractViolation("Policy::forward: previous action " + ndiff::shape_str(in.u_prev) + ", expected " +
                              ndiff::shape_str(kActionDim, in.x.cols()));
    }
    return tape.concat(x, tape.constant(in.u_prev));
  }

  GraphOutput recurrent_graph(Tape& tape, const BatchInput& in, Var x, Var h) const {
    Var s = cfg_.include_actions ? action_input(tape, in, x) : x;
    Var h_next = ndiff::gru_cell_forward(tape, gru1_, s, h);
    GraphOutput g = heads(tape, tape.concat(h_next, x));
    g.hidden = {h_next};
    return g;
  }

  GraphOutput dobnet_graph(Tape& tape, const BatchInput& in, Var x, Var h1, Var h2) const {
    Var h1_next = ndiff::gru_cell_forward(tape, gru1_, action_input(tape, in, x), h1);
    Var embedding = run_stack(tape, trunk_, h1_next);
    Var h2_next = ndiff::gru_cell_forward(tape, gru2_, embedding, h2);
    GraphOutput g = heads(tape, tape.concat(h2_next, x));
    g.hidden = {h1_next, h2_next};
    return g;
  }

  ArchitectureConfig cfg_;
  ndiff::ParamSet params_;
  std::vector<ndiff::Dense> trunk_;
  std::vector<ndiff::Dense> actor_;
  std::vector<ndiff::Dense> critic_;
  ndiff::GruCell gru1_;
  ndiff::GruCell gru2_;
  std::size_t log_std_ = 0;
};

// ---------------------------------------------------------------------------
// Action distribution

inline double gaussian_log_prob(const Vec3& a, const Vec3& mean, const Vec3& log_std) {
  double lp = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

/// Sum over axes of 0.5 ln(2 pi e) + log_std.
inline double gaussian_entropy(const Vec3& log_std) {
  return (0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_std.array()).sum();
}

/// limit * tanh(a), clamped into the control box.
inline Vec3 squash(const Vec3& a, const env::PlantParams& limits) {
  Vec3 u;
  for (int i = 0; i < 3; ++i) {
    const double t = std::tanh(a[i]);
    u[i] = t >= 0.0 ? t * limits.control_upper[i] : -t * limits.control_lower[i];
  }
  return env::clamp_control(u, limits);
}

struct SampledAction {
  Vec3 u_exec = Vec3::Zero();
  Vec3 pre_squash = Vec3::Zero();
  double log_prob = 0.0;
};

inline SampledAction sample_action(const Vec3& mean, const Vec3& log_std, const env::PlantParams& limits, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction s;
  const Vec3 ls = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  for (int i = 0; i < 3; ++i) s.pre_squash[i] = mean[i] + std::exp(ls[i]) * normal(rng);
  s.u_exec = squash(s.pre_squash, limits);
  s.log_prob = gaussian_log_prob(s.pre_squash, mean, ls);
  return s;
}

inline SampledAction sample_action(const PolicyOutput& out, const env::PlantParams& limits, Rng& rng) {
  return sample_action(out.action_mean, out.action_log_std, limits, rng);
}

/// Deterministic (evaluation) control: the squashed mean.
inline Vec3 mean_action(const PolicyOutput& out, const env::PlantParams& limits) {
  return squash(out.action_mean, limits);
}

}  // namespace dobnet::policy
