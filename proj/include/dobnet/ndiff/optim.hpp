/// @file optim.hpp
/// @brief Global-norm gradient clipping and RMSprop.

#pragma once

#include <cmath>
#include <vector>

#include "dobnet/errors.hpp"
#include "dobnet/ndiff/param_set.hpp"

namespace dobnet::ndiff {

inline void check_finite_grads(const ParamSet& params) {
  for (const auto& b : params) {
    if (!b.grad.allFinite()) throw NonFiniteError("non-finite gradient in block '" + b.name + "'");
  }
}

/// Rescales all accumulators so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParamSet& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractViolation("clip_grad_norm: max_norm must be > 0");
  check_finite_grads(params);
  const double norm = params.grad_norm();
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& b : params) b.grad *= scale;
  }
  return norm;
}

struct RmsPropConfig {
  double lr = 7e-4;
  double alpha = 0.99;
  double eps = 1e-8;
};

/// v <- alpha v + (1 - alpha) g^2;  p <- p - lr g / (sqrt(v) + eps).
/// The running averages start at zero and live as long as the optimizer.
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(const ParamSet& params, RmsPropConfig cfg) : cfg_(cfg) {
    square_avg_.reserve(params.size());
    for (const auto& b : params) square_avg_.push_back(Matrix::Zero(b.value.rows(), b.value.cols()));
  }

  const RmsPropConfig& config() const { return cfg_; }
  std::vector<Matrix>& square_avg() { return square_avg_; }
  const std::vector<Matrix>& square_avg() const { return square_avg_; }

  void step(ParamSet& params) {
    if (params.size() != square_avg_.size()) {
      throw ContractViolation("RmsProp::step: optimizer built for " + std::to_string(square_avg_.size()) +
                              " blocks, got " + std::to_string(params.size()));
    }
    check_finite_grads(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& b = params.block(i);
      Matrix& v = square_avg_[i];
      v = cfg_.alpha * v + (1.0 - cfg_.alpha) * b.grad.cwiseAbs2();
      b.value.array() -= cfg_.lr * b.grad.array() / (v.array().sqrt() + cfg_.eps);
    }
  }

 private:
  RmsPropConfig cfg_;
  std::vector<Matrix> square_avg_;
};

}  // namespace dobnet::ndiff
