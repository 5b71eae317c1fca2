#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dobnet/ndiff/param_set.hpp"
#include "dobnet/ndiff/tape.hpp"

namespace dobnet::testutil {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "block[i]"
  std::size_t checked = 0;
};

/// Relative error with a small floor so entries where both sides vanish
/// don't blow up.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares tape gradients of `build` (returns a 1x1 loss) against
/// Richardson-extrapolated central differences. Every element is checked
/// unless `per_block` > 0, in which case that many elements per block are
/// drawn at random (seeded by `sample_seed`).
inline GradCheckResult check_gradients(ndiff::ParamSet& params,
                                       const std::function<ndiff::Var(ndiff::Tape&)>& build, double eps = 1e-2,
                                       std::size_t per_block = 0, std::uint64_t sample_seed = 0) {
  params.zero_grads();
  {
    ndiff::Tape tape(params);
    tape.backward(build(tape));
  }
  auto loss_at = [&] {
    ndiff::Tape tape(static_cast<const ndiff::ParamSet&>(params));
    return tape.value(build(tape))(0, 0);
  };
  GradCheckResult res;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& blk = params.block(b);
    std::vector<ndiff::Index> idx(static_cast<std::size_t>(blk.value.size()));
    std::iota(idx.begin(), idx.end(), ndiff::Index{0});
    if (per_block > 0 && per_block < idx.size()) {
      std::mt19937_64 rng(sample_seed + b);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_block);
    }
    for (ndiff::Index i : idx) {
      const double orig = blk.value.data()[i];
      auto central = [&](double h) {
        blk.value.data()[i] = orig + h;
        const double up = loss_at();
        blk.value.data()[i] = orig - h;
        const double down = loss_at();
        blk.value.data()[i] = orig;
        return (up - down) / (2.0 * h);
      };
      const double numeric = (4.0 * central(0.5 * eps) - central(eps)) / 3.0;
      const double analytic = blk.grad.data()[i];
      const double rel = rel_error(analytic, numeric);
      ++res.checked;
      res.max_abs_error = std::max(res.max_abs_error, std::abs(analytic - numeric));
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = blk.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace dobnet::testutil
