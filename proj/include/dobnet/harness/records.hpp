/// @file records.hpp
/// @brief Per-episode trajectories and their CSV form.
///
/// Row k holds the state x_k at t_k. Rows 0..T-1 also hold the executed
/// control u_k, the disturbance d(t_k) and the running reward r(x_k, u_k).
/// The last row holds x_T with zero control, d(t_T) and the final reward.
/// Metadata goes in leading "# key=value" lines.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dobnet/env.hpp"
#include "dobnet/errors.hpp"
#include "dobnet/text.hpp"

namespace dobnet::harness {

struct EpisodeRecord {
  std::string method;
  std::string scenario;
  std::uint64_t seed = 0;
  int episode = 0;
  bool terminal = false;
  bool diverged = false;
  env::RewardWeights weights;

  std::vector<double> t;
  std::vector<env::State> x;
  std::vector<Vec3> u;
  std::vector<Vec3> d;
  std::vector<double> r;

  std::size_t rows() const { return x.size(); }
  std::size_t steps() const { return x.empty() ? 0 : x.size() - 1; }

  double total_reward() const {
    double s = 0.0;
    for (double v : r) s += v;
    return s;
  }

  /// ||q_k|| for k = 1 .. steps().
  std::vector<double> distances() const {
    std::vector<double> out;
    for (std::size_t k = 1; k < x.size(); ++k) out.push_back(x[k].q.norm());
    return out;
  }

  void push_step(double tk, const env::State& xk, const Vec3& uk, const Vec3& dk, double rk) {
    t.push_back(tk);
    x.push_back(xk);
    u.push_back(uk);
    d.push_back(dk);
    r.push_back(rk);
  }
};

/// Reward of every row recomputed from the logged state and control.
inline std::vector<double> recompute_rewards(const EpisodeRecord& rec) {
  std::vector<double> out;
  for (std::size_t k = 0; k < rec.rows(); ++k) {
    const bool last = k + 1 == rec.rows();
    out.push_back(last ? env::final_reward(rec.x[k], rec.weights) : env::running_reward(rec.x[k], rec.u[k], rec.weights));
  }
  return out;
}

/// Largest per-row gap plus the gap between the logged and recomputed sums.
inline double reward_inconsistency(const EpisodeRecord& rec) {
  const auto re = recompute_rewards(rec);
  double worst = 0.0, s = 0.0;
  for (std::size_t k = 0; k < re.size(); ++k) {
    worst = std::max(worst, std::abs(re[k] - rec.r[k]));
    s += re[k];
  }
  return std::max(worst, std::abs(s - rec.total_reward()));
}

inline constexpr const char* kRecordHeader = "t,qx,qy,qz,vx,vy,vz,ux,uy,uz,dx,dy,dz,r";

inline void write_record(std::ostream& os, const EpisodeRecord& rec) {
  os << std::setprecision(17);
  os << "# method=" << rec.method << "\n# scenario=" << rec.scenario << "\n# seed=" << rec.seed
     << "\n# episode=" << rec.episode << "\n# terminal=" << rec.terminal << "\n# diverged=" << rec.diverged
     << "\n# w_pos=" << rec.weights.w_pos << "\n# w_vel=" << rec.weights.w_vel << "\n# w_ctrl=" << rec.weights.w_ctrl
     << '\n';
  os << kRecordHeader << '\n';
  for (std::size_t k = 0; k < rec.rows(); ++k) {
    const auto& x = rec.x[k];
    os << rec.t[k];
    for (int i = 0; i < 3; ++i) os << ',' << x.q[i];
    for (int i = 0; i < 3; ++i) os << ',' << x.qdot[i];
    for (int i = 0; i < 3; ++i) os << ',' << rec.u[k][i];
    for (int i = 0; i < 3; ++i) os << ',' << rec.d[k][i];
    os << ',' << rec.r[k] << '\n';
  }
}

inline EpisodeRecord parse_record(std::istream& is) {
  EpisodeRecord rec;
  std::map<std::string, std::string> meta;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header_seen) {
      if (line != kRecordHeader) throw ParseError("expected header '" + std::string(kRecordHeader) + "'", lineno);
      header_seen = true;
      continue;
    }
    std::vector<double> v;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) v.push_back(text::to_double(tok, lineno));
    if (v.size() != 14) throw ParseError("expected 14 columns, got " + std::to_string(v.size()), lineno);
    env::State x;
    x.q = Vec3(v[1], v[2], v[3]);
    x.qdot = Vec3(v[4], v[5], v[6]);
    rec.push_step(v[0], x, Vec3(v[7], v[8], v[9]), Vec3(v[10], v[11], v[12]), v[13]);
  }
  if (!header_seen) throw ParseError("missing header '" + std::string(kRecordHeader) + "'");
  try {
    if (meta.count("method")) rec.method = meta["method"];
    if (meta.count("scenario")) rec.scenario = meta["scenario"];
    if (meta.count("seed")) rec.seed = std::stoull(meta["seed"]);
    if (meta.count("episode")) rec.episode = std::stoi(meta["episode"]);
    if (meta.count("terminal")) rec.terminal = meta["terminal"] == "1";
    if (meta.count("diverged")) rec.diverged = meta["diverged"] == "1";
    if (meta.count("w_pos")) rec.weights.w_pos = text::to_double(meta["w_pos"]);
    if (meta.count("w_vel")) rec.weights.w_vel = text::to_double(meta["w_vel"]);
    if (meta.count("w_ctrl")) rec.weights.w_ctrl = text::to_double(meta["w_ctrl"]);
  } catch (const std::exception& e) {
    throw ParseError(std::string("malformed metadata: ") + e.what());
  }
  return rec;
}

inline void save_record(const std::filesystem::path& path, const EpisodeRecord& rec) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path.string() + "' for writing");
  write_record(os, rec);
}

inline EpisodeRecord load_record(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open episode record '" + path.string() + "'");
  try {
    return parse_record(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace dobnet::harness
