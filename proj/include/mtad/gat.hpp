#pragma once

// Single-head graph attention over a complete graph with self-loops.
//
//   e_ij  = LeakyReLU(w^T [v_i ; v_j])
//   a_ij  = softmax_j(e_ij)
//   h_i   = sigmoid(sum_j a_ij v_j)
//
// The feature-oriented layer treats each of the k series in a window as a
// node of dimension n; the time-oriented layer treats each of the n
// timestamps as a node of dimension k.

#include "mtad/tensor.hpp"

namespace mtad {

inline constexpr double kGatLeakySlope = 0.2;

struct GatParams {
  // Length 2m: the first m entries score the attending node, the last m the attended one.
  Tensor w;
  double leaky_slope = kGatLeakySlope;

  Index node_dim() const { return w.size() / 2; }
};

struct GatOutput {
  Matrix h;      // nodes x m
  Matrix alpha;  // nodes x nodes, row-stochastic
};

// ---- differentiable forms -------------------------------------------------

// nodes: N x m, w: 1 x 2m. Returns the N x N attention matrix.
Var attention_scores(Var nodes, Var w, double leaky_slope = kGatLeakySlope);

struct GatVars {
  Var h;
  Var alpha;
};

GatVars gat_forward(Var nodes, Var w, double leaky_slope = kGatLeakySlope);

// x: n x k. Returns k x n, one row per feature node.
GatVars feature_gat(Var x, Var w, double leaky_slope = kGatLeakySlope);
// x: n x k. Returns n x k, one row per timestamp node.
GatVars time_gat(Var x, Var w, double leaky_slope = kGatLeakySlope);

// ---- value forms ----------------------------------------------------------

Matrix attention_scores(const Matrix& nodes, const GatParams& params);
GatOutput gat_forward(const Matrix& nodes, const GatParams& params);
Matrix feature_gat(const Matrix& x, const GatParams& params);
Matrix time_gat(const Matrix& x, const GatParams& params);

}  // namespace mtad
