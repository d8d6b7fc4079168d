#include "mtad/gat.hpp"

namespace mtad {

Var attention_scores(Var nodes, Var w, double leaky_slope) {
  const Index n_nodes = nodes.rows();
  const Index m = nodes.cols();
  if (w.rows() != 1 || w.cols() != 2 * m)
    throw DimensionError("attention: weight " + shape_string(w.rows(), w.cols()) + " does not match node dimension " +
                         std::to_string(m) + " (expected 1x" + std::to_string(2 * m) + ")");
  Tape& t = *nodes.tape;
  Var self_score = matmul(nodes, transpose(slice_cols(w, 0, m)));      // N x 1
  Var neighbor_score = matmul(nodes, transpose(slice_cols(w, m, m)));  // N x 1
  Var ones_row = t.constant(Matrix::Ones(1, n_nodes));
  Var ones_col = t.constant(Matrix::Ones(n_nodes, 1));
  // e_ij = self_i + neighbor_j
  Var e = matmul(self_score, ones_row) + matmul(ones_col, transpose(neighbor_score));
  return softmax_rows(leaky_relu(e, leaky_slope));
}

GatVars gat_forward(Var nodes, Var w, double leaky_slope) {
  Var alpha = attention_scores(nodes, w, leaky_slope);
  return {sigmoid(matmul(alpha, nodes)), alpha};
}

GatVars feature_gat(Var x, Var w, double leaky_slope) {
  if (w.cols() != 2 * x.rows())
    throw ConfigError("feature attention expects a weight of length " + std::to_string(2 * x.rows()) +
                      " for windows of " + std::to_string(x.rows()) + " steps, got " + std::to_string(w.cols()));
  return gat_forward(transpose(x), w, leaky_slope);
}

GatVars time_gat(Var x, Var w, double leaky_slope) {
  if (w.cols() != 2 * x.cols())
    throw ConfigError("time attention expects a weight of length " + std::to_string(2 * x.cols()) + " for " +
                      std::to_string(x.cols()) + " features, got " + std::to_string(w.cols()));
  return gat_forward(x, w, leaky_slope);
}

namespace {

Matrix row_weight(const GatParams& params) { return params.w.data().reshaped<Eigen::RowMajor>(1, params.w.size()); }

}  // namespace

Matrix attention_scores(const Matrix& nodes, const GatParams& params) {
  Tape t;
  return attention_scores(t.constant(nodes), t.constant(row_weight(params)), params.leaky_slope).value();
}

GatOutput gat_forward(const Matrix& nodes, const GatParams& params) {
  Tape t;
  GatVars out = gat_forward(t.constant(nodes), t.constant(row_weight(params)), params.leaky_slope);
  return {out.h.value(), out.alpha.value()};
}

Matrix feature_gat(const Matrix& x, const GatParams& params) {
  Tape t;
  return feature_gat(t.constant(x), t.constant(row_weight(params)), params.leaky_slope).h.value();
}

Matrix time_gat(const Matrix& x, const GatParams& params) {
  Tape t;
  return time_gat(t.constant(x), t.constant(row_weight(params)), params.leaky_slope).h.value();
}

}  // namespace mtad
