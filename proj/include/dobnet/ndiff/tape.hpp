/// @file tape.hpp
/// @brief Reverse-mode differentiation tape over dense matrices.
///
/// Every node holds a (rows x batch) matrix; a plain vector is the batch = 1
/// case. Parameter blocks enter the tape as leaves (one leaf per block per
/// tape) and their gradients are added into the owning ParamSet during
/// `backward`.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dobnet/errors.hpp"
#include "dobnet/ndiff/param_set.hpp"

namespace dobnet::ndiff {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  explicit Tape(ParamSet& params) : params_(&params), grads_(&params), param_nodes_(params.size()) {}

  /// Forward-only tape: `backward` is rejected.
  explicit Tape(const ParamSet& params) : params_(&params), param_nodes_(params.size()) {}

  const ParamSet& params() const { return *params_; }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  /// Drop every intermediate. Parameter blocks are untouched.
  void reset() {
    nodes_.clear();
    param_nodes_.assign(params_->size(), std::nullopt);
  }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }

  Var constant(Matrix m) { return push(Op::kConstant, std::move(m)); }

  Var param(std::size_t block) {
    if (block >= params_->size()) {
      throw ContractViolation("Tape: parameter block index " + std::to_string(block) + " out of range");
    }
    if (param_nodes_.size() < params_->size()) param_nodes_.resize(params_->size());
    if (!param_nodes_[block]) {
      Var v = push(Op::kParam, params_->block(block).value);
      nodes_[v.id].block = block;
      param_nodes_[block] = v.id;
    }
    return Var{*param_nodes_[block]};
  }

  Var matmul(Var a, Var b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (A.cols() != B.rows()) {
      throw ContractViolation("Tape::matmul: " + shape_str(A) + " * " + shape_str(B));
    }
    return push(Op::kMatMul, A * B, a, b);
  }

  Var add(Var a, Var b) {
    check_same("add", a, b);
    return push(Op::kAdd, value(a) + value(b), a, b);
  }

  Var sub(Var a, Var b) {
    check_same("sub", a, b);
    return push(Op::kSub, value(a) - value(b), a, b);
  }

  /// Hadamard product.
  Var mul(Var a, Var b) {
    check_same("mul", a, b);
    return push(Op::kMul, value(a).cwiseProduct(value(b)), a, b);
  }

  /// Adds a column vector `bias` to every column of `a`.
  Var add_bias(Var a, Var bias) {
    const Matrix& A = value(a);
    const Matrix& B = value(bias);
    if (B.cols() != 1 || B.rows() != A.rows()) {
      throw ContractViolation("Tape::add_bias: " + shape_str(A) + " + bias " + shape_str(B));
    }
    Matrix out = A.colwise() + B.col(0);
    return push(Op::kAddBias, std::move(out), a, bias);
  }

  /// Elementwise product with a constant matrix (no gradient to the constant).
  Var mul_const(Var a, const Matrix& c) {
    const Matrix& A = value(a);
    if (A.rows() != c.rows() || A.cols() != c.cols()) {
      throw ContractViolation("Tape::mul_const: " + shape_str(A) + " vs " + shape_str(c));
    }
    Var v = push(Op::kMulConst, A.cwiseProduct(c), a);
    nodes_[v.id].aux = c;
    return v;
  }

  /// scale * a + shift, elementwise.
  Var affine(Var a, double scale, double shift) {
    Matrix out = (value(a).array() * scale + shift).matrix();
    Var v = push(Op::kAffine, std::move(out), a);
    nodes_[v.id].scale = scale;
    return v;
  }

  Var sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    return push(Op::kSigmoid, std::move(out), a);
  }

  Var tanh(Var a) { return push(Op::kTanh, value(a).array().tanh().matrix(), a); }

  Var exp(Var a) { return push(Op::kExp, value(a).array().exp().matrix(), a); }

  Var square(Var a) { return push(Op::kSquare, value(a).array().square().matrix(), a); }

  /// Elementwise clamp; gradient passes only strictly inside (lo, hi).
  Var clamp(Var a, double lo, double hi) {
    Matrix out = value(a).cwiseMax(lo).cwiseMin(hi);
    Var v = push(Op::kClamp, std::move(out), a);
    nodes_[v.id].lo = lo;
    nodes_[v.id].hi = hi;
    return v;
  }

  /// Vertical concatenation [top; bottom].
  Var concat(Var top, Var bottom) {
    const Matrix& T = value(top);
    const Matrix& B = value(bottom);
    if (T.cols() != B.cols()) {
      throw ContractViolation("Tape::concat: " + shape_str(T) + " over " + shape_str(B));
    }
    Matrix out(T.rows() + B.rows(), T.cols());
    out.topRows(T.rows()) = T;
    out.bottomRows(B.rows()) = B;
    return push(Op::kConcat, std::move(out), top, bottom);
  }

  /// Repeat a column vector `cols` times.
  Var broadcast_cols(Var a, Index cols) {
    const Matrix& A = value(a);
    if (A.cols() != 1 || cols <= 0) {
      throw ContractViolation("Tape::broadcast_cols: source " + shape_str(A) + " to " +
                              std::to_string(cols) + " columns");
    }
    return push(Op::kBroadcastCols, A.replicate(1, cols), a);
  }

  /// Sum of all elements, as a 1x1 node.
  Var sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    return push(Op::kSum, std::move(out), a);
  }

  /// Adds d(loss)/d(block) into every parameter gradient accumulator.
  /// Accumulates; never overwrites.
  void backward(Var loss, double loss_grad = 1.0) {
    if (nodes_.empty()) throw ContractViolation("Tape::backward: tape is empty");
    if (!grads_) throw ContractViolation("Tape::backward: tape was built over read-only parameters");
    if (loss.id >= nodes_.size()) throw ContractViolation("Tape::backward: loss node not on tape");
    const Matrix& L = value(loss);
    if (L.rows() != 1 || L.cols() != 1) {
      throw ContractViolation("Tape::backward: loss must be a scalar node, got " + shape_str(L));
    }

    std::vector<Matrix> grads(loss.id + 1);
    std::vector<bool> live(loss.id + 1, false);
    grads[loss.id] = Matrix::Constant(1, 1, loss_grad);
    live[loss.id] = true;

    auto accum = [&](std::size_t id, const auto& g) {
      if (!live[id]) {
        grads[id] = g;
        live[id] = true;
      } else {
        grads[id] += g;
      }
    };

    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (!live[i]) continue;
      const Node& n = nodes_[i];
      const Matrix& g = grads[i];
      switch (n.op) {
        case Op::kConstant:
          break;
        case Op::kParam:
          grads_->block(n.block).grad += g;
          break;
        case Op::kMatMul:
          accum(n.a, g * nodes_[n.b].value.transpose());
          accum(n.b, nodes_[n.a].value.transpose() * g);
          break;
        case Op::kAdd:
          accum(n.a, g);
          accum(n.b, g);
          break;
        case Op::kSub:
          accum(n.a, g);
          accum(n.b, -g);
          break;
        case Op::kMul:
          accum(n.a, g.cwiseProduct(nodes_[n.b].value));
          accum(n.b, g.cwiseProduct(nodes_[n.a].value));
          break;
        case Op::kAddBias:
          accum(n.a, g);
          accum(n.b, Matrix(g.rowwise().sum()));
          break;
        case Op::kMulConst:
          accum(n.a, g.cwiseProduct(n.aux));
          break;
        case Op::kAffine:
          accum(n.a, Matrix(g * n.scale));
          break;
        case Op::kSigmoid:
          accum(n.a, Matrix(g.array() * n.value.array() * (1.0 - n.value.array())));
          break;
        case Op::kTanh:
          accum(n.a, Matrix(g.array() * (1.0 - n.value.array().square())));
          break;
        case Op::kExp:
          accum(n.a, g.cwiseProduct(n.value));
          break;
        case Op::kSquare:
          accum(n.a, Matrix(2.0 * g.array() * nodes_[n.a].value.array()));
          break;
        case Op::kClamp: {
          const Matrix& x = nodes_[n.a].value;
          Matrix mask = ((x.array() > n.lo) && (x.array() < n.hi)).cast<double>().matrix();
          accum(n.a, g.cwiseProduct(mask));
          break;
        }
        case Op::kConcat: {
          const Index top = nodes_[n.a].value.rows();
          accum(n.a, Matrix(g.topRows(top)));
          accum(n.b, Matrix(g.bottomRows(g.rows() - top)));
          break;
        }
        case Op::kBroadcastCols:
          accum(n.a, Matrix(g.rowwise().sum()));
          break;
        case Op::kSum:
          accum(n.a, Matrix::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
          break;
      }
    }
  }

 private:
  enum class Op {
    kConstant,
    kParam,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kAddBias,
    kMulConst,
    kAffine,
    kSigmoid,
    kTanh,
    kExp,
    kSquare,
    kClamp,
    kConcat,
    kBroadcastCols,
    kSum,
  };

  struct Node {
    Op op;
    Matrix value;
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t block = 0;
    double scale = 1.0;
    double lo = 0.0;
    double hi = 0.0;
    Matrix aux;
  };

  Var push(Op op, Matrix value, Var a = {}, Var b = {}) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.a = a.id;
    n.b = b.id;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  void check_same(const char* op, Var a, Var b) const {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
      throw ContractViolation(std::string("Tape::") + op + ": " + shape_str(A) + " vs " + shape_str(B));
    }
  }

  const ParamSet* params_;
  ParamSet* grads_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::optional<std::size_t>> param_nodes_;
};

}  // namespace dobnet::ndiff
