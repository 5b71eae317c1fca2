#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace dobnet {

using Vec3 = Eigen::Vector3d;

/// Every stochastic element (start states, disturbance draws, action noise)
/// pulls from one of these, seeded explicitly.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x0d0b7e7u};
  return Rng(seq);
}

}  // namespace dobnet
