/// @file text.hpp
/// @brief Small parsing helpers shared by the CSV and INI readers.

#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "dobnet/errors.hpp"

namespace dobnet::text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Whole-string decimal parse. Accepts subnormals, inf and nan, unlike std::stod.
inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline double to_double(std::string_view s, std::size_t line = 0) {
  double v = 0.0;
  if (!parse_double(s, v)) throw ParseError("malformed value '" + std::string(s) + "'", line);
  return v;
}

}  // namespace dobnet::text
