/// @file layers.hpp
/// @brief Dense and GRU layers recorded on a Tape.

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "dobnet/errors.hpp"
#include "dobnet/ndiff/param_set.hpp"
#include "dobnet/ndiff/tape.hpp"

namespace dobnet::ndiff {

enum class Activation { kNone, kTanh };

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <typename Rng>
void init_uniform_fan_in(Matrix& w, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
}

struct Dense {
  std::string name;
  std::size_t weight = 0;
  std::size_t bias = 0;
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::kNone;

  /// Adds `<name>.W` (out x in) and `<name>.b` (out x 1) to `params`.
  template <typename Rng>
  static Dense create(ParamSet& params, const std::string& name, Index in, Index out,
                      Activation act, Rng& rng) {
    Dense d;
    d.name = name;
    d.in = in;
    d.out = out;
    d.activation = act;
    d.weight = params.add(name + ".W", out, in);
    d.bias = params.add(name + ".b", out, 1);
    init_uniform_fan_in(params.block(d.weight).value, in, rng);
    return d;
  }

  static std::size_t parameter_count(Index in, Index out) {
    return static_cast<std::size_t>(out * in + out);
  }
};

/// W * input + b, then the layer's activation.
inline Var dense_forward(Tape& tape, const Dense& layer, Var input) {
  const Matrix& x = tape.value(input);
  if (x.rows() != layer.in) {
    throw ContractViolation("dense_forward: block '" + layer.name + "' expects input " +
                            shape_str(layer.in, x.cols()) + ", got " + shape_str(x));
  }
  Var y = tape.add_bias(tape.matmul(tape.param(layer.weight), input), tape.param(layer.bias));
  if (layer.activation == Activation::kTanh) y = tape.tanh(y);
  return y;
}

/// Gated recurrent unit. Every gate matrix multiplies the concatenation
/// [h_prev; input] (hidden rows first), so its shape is hidden x (hidden + input).
struct GruCell {
  std::string name;
  std::size_t w_z = 0, w_r = 0, w_h = 0;
  std::size_t b_z = 0, b_r = 0, b_h = 0;
  Index input = 0;
  Index hidden = 0;

  template <typename Rng>
  static GruCell create(ParamSet& params, const std::string& name, Index input, Index hidden,
                        Rng& rng) {
    GruCell g;
    g.name = name;
    g.input = input;
    g.hidden = hidden;
    const Index fan_in = hidden + input;
    g.w_z = params.add(name + ".W_z", hidden, fan_in);
    g.w_r = params.add(name + ".W_r", hidden, fan_in);
    g.w_h = params.add(name + ".W_h", hidden, fan_in);
    g.b_z = params.add(name + ".b_z", hidden, 1);
    g.b_r = params.add(name + ".b_r", hidden, 1);
    g.b_h = params.add(name + ".b_h", hidden, 1);
    for (std::size_t w : {g.w_z, g.w_r, g.w_h}) init_uniform_fan_in(params.block(w).value, fan_in, rng);
    return g;
  }

  static std::size_t parameter_count(Index input, Index hidden) {
    return static_cast<std::size_t>(3 * hidden * (hidden + input) + 3 * hidden);
  }
};

/// One GRU step:
///   z = sigmoid(W_z [h, s] + b_z)
///   r = sigmoid(W_r [h, s] + b_r)
///   c = tanh(W_h [r o h, s] + b_h)
///   h' = (1 - z) o h + z o c
inline Var gru_cell_forward(Tape& tape, const GruCell& cell, Var input, Var h_prev) {
  const Matrix& s = tape.value(input);
  const Matrix& h = tape.value(h_prev);
  if (s.rows() != cell.input || h.rows() != cell.hidden || s.cols() != h.cols()) {
    throw ContractViolation("gru_cell_forward: block '" + cell.name + "' expects input " +
                            shape_str(cell.input, h.cols()) + " and hidden " +
                            shape_str(cell.hidden, h.cols()) + ", got " + shape_str(s) + " and " +
                            shape_str(h));
  }
  Var hs = tape.concat(h_prev, input);
  Var z = tape.sigmoid(tape.add_bias(tape.matmul(tape.param(cell.w_z), hs), tape.param(cell.b_z)));
  Var r = tape.sigmoid(tape.add_bias(tape.matmul(tape.param(cell.w_r), hs), tape.param(cell.b_r)));
  Var rh = tape.concat(tape.mul(r, h_prev), input);
  Var cand = tape.tanh(tape.add_bias(tape.matmul(tape.param(cell.w_h), rh), tape.param(cell.b_h)));
  Var keep = tape.mul(tape.affine(z, -1.0, 1.0), h_prev);
  return tape.add(keep, tape.mul(z, cand));
}

}  // namespace dobnet::ndiff
