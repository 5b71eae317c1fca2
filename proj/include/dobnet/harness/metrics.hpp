/// @file metrics.hpp
/// @brief Distance-to-target statistics and the comparison report.
///
/// Distances are pooled over all episodes of a method, split into the first
/// and second half of the horizon (steps 1..T/2 and T/2+1..T). Quantiles use
/// linear interpolation between order statistics; whiskers reach the most
/// extreme samples within 1.5 IQR of the box.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dobnet/errors.hpp"
#include "dobnet/text.hpp"
#include "dobnet/harness/records.hpp"

namespace dobnet::harness {

/// Quantile p in [0, 1] of ascending `sorted`, interpolating linearly.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ContractViolation("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ContractViolation("quantile level must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BoxStats {
  std::size_t n = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  double mean = 0.0;
};

inline BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw ContractViolation("box_stats: empty sample");
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.n = v.size();
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = *std::lower_bound(v.begin(), v.end(), lo_fence);
  b.whisker_hi = *(std::upper_bound(v.begin(), v.end(), hi_fence) - 1);
  double s = 0.0;
  for (double x : v) s += x;
  b.mean = s / static_cast<double>(v.size());
  return b;
}

struct DistanceStats {
  std::string method;
  std::string scenario;
  std::size_t episodes = 0;
  BoxStats phase1;
  BoxStats phase2;
  double converged_radius = 0.0;
  double mean_episode_reward = 0.0;
};

/// `tail` is the converged-region window (last steps of each episode).
inline DistanceStats distance_stats(const std::vector<EpisodeRecord>& records, std::size_t tail = 50) {
  if (records.empty()) throw ContractViolation("distance_stats: no episode records");
  std::vector<double> p1, p2;
  double radius_sum = 0.0, reward_sum = 0.0;
  // Diverged episodes are shorter; the phase boundary follows the longest one.
  std::size_t horizon = 0;
  for (const auto& rec : records) horizon = std::max(horizon, rec.steps());
  const std::size_t split = std::max<std::size_t>(1, horizon / 2);
  for (const auto& rec : records) {
    const auto dist = rec.distances();
    if (dist.empty()) throw ContractViolation("distance_stats: episode with no steps");
    for (std::size_t i = 0; i < dist.size(); ++i) (i < split ? p1 : p2).push_back(dist[i]);
    const std::size_t from = dist.size() > tail ? dist.size() - tail : 0;
    radius_sum += *std::max_element(dist.begin() + static_cast<std::ptrdiff_t>(from), dist.end());
    reward_sum += rec.total_reward();
  }
  if (p2.empty()) p2 = p1;
  DistanceStats s;
  s.method = records.front().method;
  s.scenario = records.front().scenario;
  s.episodes = records.size();
  s.phase1 = box_stats(std::move(p1));
  s.phase2 = box_stats(std::move(p2));
  s.converged_radius = radius_sum / static_cast<double>(records.size());
  s.mean_episode_reward = reward_sum / static_cast<double>(records.size());
  return s;
}

/// 100 * second-phase median of `method` over that of `oracle`.
inline double median_ratio(const DistanceStats& method, const DistanceStats& oracle) {
  if (!(oracle.phase2.median > 0.0)) {
    throw ContractViolation("median_ratio: oracle second-phase median is zero; ratio undefined");
  }
  return 100.0 * method.phase2.median / oracle.phase2.median;
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string method;
  std::string scenario;
  int phase = 1;
  std::size_t episodes = 0;
  BoxStats box;
  double converged_radius = 0.0;
  double mean_episode_reward = 0.0;
  double median_ratio_pct = std::numeric_limits<double>::quiet_NaN();  // NaN without an oracle row
};

inline constexpr const char* kReportHeader =
    "method,scenario,phase,episodes,samples,q1,median,q3,whisker_lo,whisker_hi,mean,converged_radius,"
    "mean_episode_reward,median_ratio_pct";

/// Two rows per method (phase 1 and 2). The ratio column compares each
/// phase's median with the "trajopt" entry of the same scenario.
inline std::vector<ReportRow> build_report(const std::vector<DistanceStats>& stats) {
  std::map<std::string, const DistanceStats*> oracle;
  for (const auto& s : stats) {
    if (s.method == "trajopt") oracle[s.scenario] = &s;
  }
  std::vector<ReportRow> rows;
  for (const auto& s : stats) {
    for (int phase = 1; phase <= 2; ++phase) {
      ReportRow r;
      r.method = s.method;
      r.scenario = s.scenario;
      r.phase = phase;
      r.episodes = s.episodes;
      r.box = phase == 1 ? s.phase1 : s.phase2;
      r.converged_radius = s.converged_radius;
      r.mean_episode_reward = s.mean_episode_reward;
      const auto it = oracle.find(s.scenario);
      if (it != oracle.end()) {
        const double denom = phase == 1 ? it->second->phase1.median : it->second->phase2.median;
        if (denom > 0.0) r.median_ratio_pct = 100.0 * r.box.median / denom;
      }
      rows.push_back(r);
    }
  }
  return rows;
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << std::setprecision(17) << kReportHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.scenario << ',' << r.phase << ',' << r.episodes << ',' << r.box.n << ',' << r.box.q1
       << ',' << r.box.median << ',' << r.box.q3 << ',' << r.box.whisker_lo << ',' << r.box.whisker_hi << ','
       << r.box.mean << ',' << r.converged_radius << ',' << r.mean_episode_reward << ',' << r.median_ratio_pct
       << '\n';
  }
}

inline std::vector<ReportRow> parse_report_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != kReportHeader) throw ParseError("expected report header", 1);
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) c.push_back(tok);
    if (c.size() != 14) throw ParseError("expected 14 columns, got " + std::to_string(c.size()), lineno);
    try {
      ReportRow r;
      r.method = c[0];
      r.scenario = c[1];
      r.phase = std::stoi(c[2]);
      r.episodes = std::stoull(c[3]);
      r.box.n = std::stoull(c[4]);
      r.box.q1 = text::to_double(c[5], lineno);
      r.box.median = text::to_double(c[6], lineno);
      r.box.q3 = text::to_double(c[7], lineno);
      r.box.whisker_lo = text::to_double(c[8], lineno);
      r.box.whisker_hi = text::to_double(c[9], lineno);
      r.box.mean = text::to_double(c[10], lineno);
      r.converged_radius = text::to_double(c[11], lineno);
      r.mean_episode_reward = text::to_double(c[12], lineno);
      r.median_ratio_pct = text::to_double(c[13], lineno);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("malformed report row '" + line + "'", lineno);
    }
  }
  return rows;
}

inline void write_report_text(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << std::left << std::setw(12) << "method" << std::setw(22) << "scenario" << std::right << std::setw(6) << "phase"
     << std::setw(10) << "q1" << std::setw(10) << "median" << std::setw(10) << "q3" << std::setw(10) << "mean"
     << std::setw(10) << "radius" << std::setw(12) << "reward" << std::setw(10) << "ratio%" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.method << std::setw(22) << r.scenario << std::right << std::setw(6)
       << r.phase << std::setprecision(3) << std::setw(10) << r.box.q1 << std::setw(10) << r.box.median
       << std::setw(10) << r.box.q3 << std::setw(10) << r.box.mean << std::setw(10) << r.converged_radius
       << std::setprecision(1) << std::setw(12) << r.mean_episode_reward << std::setw(10);
    if (std::isnan(r.median_ratio_pct)) {
      os << "-";
    } else {
      os << r.median_ratio_pct;
    }
    os << '\n';
  }
  os.unsetf(std::ios::fixed);
}

}  // namespace dobnet::harness
