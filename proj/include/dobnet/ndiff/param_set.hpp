/// @file param_set.hpp
/// @brief Named parameter blocks with gradient accumulators.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dobnet/errors.hpp"

namespace dobnet::ndiff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::string shape_str(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

inline std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

struct ParamBlock {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Ordered collection of parameter blocks. Blocks are added while an
/// architecture is being built; after `freeze()` the topology is fixed.
/// Copying a ParamSet makes an independent replica (values and gradients).
class ParamSet {
 public:
  std::size_t add(std::string name, Index rows, Index cols) {
    if (frozen_) {
      throw ContractViolation("ParamSet: cannot add block '" + name + "' after freeze");
    }
    if (rows <= 0 || cols <= 0) {
      throw ContractViolation("ParamSet: block '" + name + "' has empty shape " +
                              shape_str(rows, cols));
    }
    for (const auto& b : blocks_) {
      if (b.name == name) throw ContractViolation("ParamSet: duplicate block '" + name + "'");
    }
    blocks_.push_back({std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
    return blocks_.size() - 1;
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t size() const { return blocks_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
    return n;
  }

  ParamBlock& block(std::size_t i) { return blocks_.at(i); }
  const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i].name == name) return i;
    }
    throw ContractViolation("ParamSet: no block named '" + std::string(name) + "'");
  }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  void zero_grads() {
    for (auto& b : blocks_) b.grad.setZero();
  }

  /// Global L2 norm over every gradient accumulator.
  double grad_norm() const {
    double sq = 0.0;
    for (const auto& b : blocks_) sq += b.grad.squaredNorm();
    return std::sqrt(sq);
  }

  /// Synchronize a replica: copy parameter values, keep own gradients.
  void copy_values_from(const ParamSet& other) {
    check_same_layout(other);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].value = other.blocks_[i].value;
  }

  /// Replica -> global reduction.
  void add_grads_from(const ParamSet& other) {
    check_same_layout(other);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].grad += other.blocks_[i].grad;
  }

  void check_same_layout(const ParamSet& other) const {
    if (other.blocks_.size() != blocks_.size()) {
      throw ContractViolation("ParamSet: block count mismatch " + std::to_string(blocks_.size()) +
                              " vs " + std::to_string(other.blocks_.size()));
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& a = blocks_[i];
      const auto& b = other.blocks_[i];
      if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
        throw ContractViolation("ParamSet: layout mismatch at block '" + a.name + "' " +
                                shape_str(a.value) + " vs '" + b.name + "' " + shape_str(b.value));
      }
    }
  }

 private:
  std::vector<ParamBlock> blocks_;
  bool frozen_ = false;
};

}  // namespace dobnet::ndiff
