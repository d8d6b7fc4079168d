#include "mtad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mtad {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::string shape_string(Index rows, Index cols) { return shape_string(Shape{rows, cols}); }

namespace {

std::pair<Index, Index> storage_dims(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  for (Index e : shape)
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  if (shape.size() == 1) return {1, shape[0]};
  const Index rest = std::accumulate(shape.begin() + 1, shape.end(), Index{1}, std::multiplies<>());
  return {shape[0], rest};
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, bool requires_grad) : shape_(std::move(shape)) {
  const auto [r, c] = storage_dims(shape_);
  data_ = Matrix::Zero(r, c);
  set_requires_grad(requires_grad);
}

Tensor::Tensor(Shape shape, Matrix data, bool requires_grad) : shape_(std::move(shape)) {
  const auto [r, c] = storage_dims(shape_);
  if (data.size() != r * c)
    throw DimensionError("tensor data of " + std::to_string(data.size()) + " values does not fit shape " +
                         shape_string(shape_));
  if (!data.allFinite()) throw NumericError("tensor data contains non-finite values");
  data_ = std::move(data);
  if (data_.rows() != r) data_ = Eigen::Map<const Matrix>(Matrix(data_).data(), r, c);
  set_requires_grad(requires_grad);
}

Tensor Tensor::from_matrix(Matrix data, bool requires_grad) {
  Shape shape{data.rows(), data.cols()};
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on)
    grad_ = Matrix::Zero(data_.rows(), data_.cols());
  else
    grad_.resize(0, 0);
}

const Matrix& Tensor::grad() const {
  if (!requires_grad_) throw StateError("tensor " + shape_string(shape_) + " does not track gradients");
  return grad_;
}

Matrix& Tensor::grad() {
  if (!requires_grad_) throw StateError("tensor " + shape_string(shape_) + " does not track gradients");
  return grad_;
}

void Tensor::zero_grad() {
  if (requires_grad_) grad_.setZero();
}

// ---- Tape -----------------------------------------------------------------

const Matrix& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
  if (!is_scalar()) throw DimensionError("expected a scalar, got " + shape_string(rows(), cols()));
  return value()(0, 0);
}

Var Tape::push(Node node) {
  if (consumed_) throw StateError("tape already consumed by backward(); reset() before recording");
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check_owner(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
}

Var Tape::leaf(Tensor& t) {
  Node n;
  n.value = t.data();
  n.leaf = &t;
  n.needs_grad = t.requires_grad();
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("constant contains non-finite values");
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> operands, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(operands.begin(), operands.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> operands, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  for (const Var& v : operands) {
    check_owner(v);
    n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  }
  n.value = std::move(value);
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const {
  check_owner(v);
  return nodes_[v.id].value;
}

Matrix Tape::grad(Var v) const {
  check_owner(v);
  if (v.id < grads_.size() && grads_[v.id].size() != 0) return grads_[v.id];
  return Matrix::Zero(nodes_[v.id].value.rows(), nodes_[v.id].value.cols());
}

void Tape::backward(Var loss) {
  if (consumed_) throw StateError("backward() called on a consumed tape");
  check_owner(loss);
  if (!loss.is_scalar())
    throw DimensionError("backward() needs a scalar loss, got " + shape_string(loss.rows(), loss.cols()));
  consumed_ = true;
  grads_.assign(nodes_.size(), Matrix());
  if (!nodes_[loss.id].needs_grad) return;
  grads_[loss.id] = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || grads_[i].size() == 0) continue;
    if (n.leaf != nullptr) {
      n.leaf->grad() += grads_[i];
    } else if (n.backward) {
      n.backward(*this, grads_[i]);
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  consumed_ = false;
}

void backward(Tape& tape, Var loss) { tape.backward(loss); }

// ---- primitives -----------------------------------------------------------

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw StateError("operands live on different tapes");
  return *a.tape;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
}

// Reduces a gradient back to the operand's shape when the operand was broadcast.
void accumulate_broadcast(Tape& t, std::size_t id, const Matrix& g) {
  const Matrix& v = t.value(id);
  if (v.rows() == g.rows() && v.cols() == g.cols())
    t.accumulate(id, g);
  else
    t.accumulate(id, Matrix::Constant(1, 1, g.sum()));
}

enum class BinaryShape { same, a_scalar, b_scalar };

BinaryShape binary_shape(const char* op, Var a, Var b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return BinaryShape::same;
  if (a.is_scalar()) return BinaryShape::a_scalar;
  if (b.is_scalar()) return BinaryShape::b_scalar;
  require_same_shape(op, a, b);
  return BinaryShape::same;
}

template <typename F>
Matrix broadcast_apply(BinaryShape s, const Matrix& a, const Matrix& b, F f) {
  switch (s) {
    case BinaryShape::a_scalar:
      return f(Matrix::Constant(b.rows(), b.cols(), a(0, 0)), b);
    case BinaryShape::b_scalar:
      return f(a, Matrix::Constant(a.rows(), a.cols(), b(0, 0)));
    default:
      return f(a, b);
  }
}

template <typename Fwd, typename Deriv>
Var unary(const char* op, Var x, Fwd fwd, Deriv deriv) {
  Tape& t = *x.tape;
  Matrix out = fwd(x.value());
  const std::size_t xi = x.id;
  return t.record(op, std::move(out), {x}, [xi, deriv](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, deriv(tp.value(xi), g));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const std::size_t ai = a.id, bi = b.id;
  return t.record("matmul", std::move(out), {a, b}, [ai, bi](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ai)) {
      Matrix da(g.rows(), tp.value(bi).rows());
      da.noalias() = g * tp.value(bi).transpose();
      tp.accumulate(ai, da);
    }
    if (tp.needs_grad(bi)) {
      Matrix db(tp.value(ai).cols(), g.cols());
      db.noalias() = tp.value(ai).transpose() * g;
      tp.accumulate(bi, db);
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const BinaryShape s = binary_shape("add", a, b);
  Matrix out = broadcast_apply(s, a.value(), b.value(), [](const Matrix& x, const Matrix& y) { return Matrix(x + y); });
  const std::size_t ai = a.id, bi = b.id;
  return t.record("add", std::move(out), {a, b}, [ai, bi](Tape& tp, const Matrix& g) {
    accumulate_broadcast(tp, ai, g);
    accumulate_broadcast(tp, bi, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const BinaryShape s = binary_shape("sub", a, b);
  Matrix out = broadcast_apply(s, a.value(), b.value(), [](const Matrix& x, const Matrix& y) { return Matrix(x - y); });
  const std::size_t ai = a.id, bi = b.id;
  return t.record("sub", std::move(out), {a, b}, [ai, bi](Tape& tp, const Matrix& g) {
    accumulate_broadcast(tp, ai, g);
    accumulate_broadcast(tp, bi, Matrix(-g));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const BinaryShape s = binary_shape("mul", a, b);
  Matrix out = broadcast_apply(s, a.value(), b.value(),
                               [](const Matrix& x, const Matrix& y) { return Matrix(x.cwiseProduct(y)); });
  const std::size_t ai = a.id, bi = b.id;
  return t.record("mul", std::move(out), {a, b}, [ai, bi, s](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(ai);
    const Matrix& bv = tp.value(bi);
    if (tp.needs_grad(ai)) {
      Matrix da = s == BinaryShape::b_scalar ? Matrix(g * bv(0, 0)) : Matrix(g.cwiseProduct(bv));
      accumulate_broadcast(tp, ai, da);
    }
    if (tp.needs_grad(bi)) {
      Matrix db = s == BinaryShape::a_scalar ? Matrix(g * av(0, 0)) : Matrix(g.cwiseProduct(av));
      accumulate_broadcast(tp, bi, db);
    }
  });
}

Var add(Var a, double c) {
  return unary(
      "add_scalar", a, [c](const Matrix& x) { return Matrix(x.array() + c); },
      [](const Matrix&, const Matrix& g) { return g; });
}

Var mul(Var a, double c) {
  return unary(
      "mul_scalar", a, [c](const Matrix& x) { return Matrix(x * c); },
      [c](const Matrix&, const Matrix& g) { return Matrix(g * c); });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator-(Var a) { return mul(a, -1.0); }

Var sigmoid(Var x) {
  Tape& t = *x.tape;
  // exp overflow saturates to exactly 0 instead of producing NaN.
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  const std::size_t xi = x.id;
  const std::size_t oi = t.size();
  return t.record("sigmoid", std::move(out), {x}, [xi, oi](Tape& tp, const Matrix& g) {
    const auto y = tp.value(oi).array();
    tp.accumulate(xi, (g.array() * y * (1.0 - y)).matrix());
  });
}

Var tanh(Var x) {
  Tape& t = *x.tape;
  Matrix out = x.value().array().tanh().matrix();
  const std::size_t xi = x.id;
  const std::size_t oi = t.size();
  return t.record("tanh", std::move(out), {x}, [xi, oi](Tape& tp, const Matrix& g) {
    const auto y = tp.value(oi).array();
    tp.accumulate(xi, (g.array() * (1.0 - y * y)).matrix());
  });
}

Var exp(Var x) {
  Tape& t = *x.tape;
  Matrix out = x.value().array().exp().matrix();
  const std::size_t xi = x.id;
  const std::size_t oi = t.size();
  return t.record("exp", std::move(out), {x}, [xi, oi](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, g.cwiseProduct(tp.value(oi)));
  });
}

Var log(Var x) {
  if ((x.value().array() <= 0.0).any()) throw DomainError("log: input contains non-positive values");
  return unary(
      "log", x, [](const Matrix& v) { return Matrix(v.array().log()); },
      [](const Matrix& v, const Matrix& g) { return Matrix(g.array() / v.array()); });
}

Var sqrt(Var x) {
  if ((x.value().array() < 0.0).any()) throw DomainError("sqrt: input contains negative values");
  Tape& t = *x.tape;
  Matrix out = x.value().array().sqrt().matrix();
  const std::size_t xi = x.id;
  const std::size_t oi = t.size();
  return t.record("sqrt", std::move(out), {x}, [xi, oi](Tape& tp, const Matrix& g) {
    // Subgradient 0 at the origin.
    const Matrix& y = tp.value(oi);
    Matrix d = g.binaryExpr(y, [](double gv, double yv) { return yv > 0 ? 0.5 * gv / yv : 0.0; });
    tp.accumulate(xi, d);
  });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      "leaky_relu", x,
      [slope](const Matrix& v) { return Matrix(v.unaryExpr([slope](double a) { return a >= 0 ? a : slope * a; })); },
      [slope](const Matrix& v, const Matrix& g) {
        return Matrix(g.binaryExpr(v, [slope](double gv, double a) { return a >= 0 ? gv : slope * gv; }));
      });
}

Var relu(Var x) { return leaky_relu(x, 0.0); }

Var clamp_min(Var x, double floor) {
  return unary(
      "clamp_min", x, [floor](const Matrix& v) { return Matrix(v.cwiseMax(floor)); },
      [floor](const Matrix& v, const Matrix& g) {
        return Matrix(g.binaryExpr(v, [floor](double gv, double a) { return a > floor ? gv : 0.0; }));
      });
}

namespace {

Matrix softmax_rows_value(const Matrix& e) {
  Matrix out(e.rows(), e.cols());
  for (Index i = 0; i < e.rows(); ++i) {
    const double m = e.row(i).maxCoeff();
    out.row(i) = (e.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& g) {
  // dx = y * (g - <g, y>) per row
  Vector dots = (g.cwiseProduct(y)).rowwise().sum();
  Matrix dx = y.cwiseProduct(g);
  dx -= (y.array().colwise() * dots.array()).matrix();
  return dx;
}

}  // namespace

Var softmax_rows(Var e) {
  if (e.value().size() == 0) throw DimensionError("softmax: empty input");
  Tape& t = *e.tape;
  Matrix out = softmax_rows_value(e.value());
  const std::size_t ei = e.id;
  const std::size_t oi = t.size();
  return t.record("softmax_rows", std::move(out), {e}, [ei, oi](Tape& tp, const Matrix& g) {
    tp.accumulate(ei, softmax_rows_backward(tp.value(oi), g));
  });
}

Var softmax(Var e) {
  if (e.value().size() == 0) throw DimensionError("softmax: empty input");
  if (e.rows() != 1 && e.cols() != 1)
    throw DimensionError("softmax: expected a vector, got " + shape_string(e.rows(), e.cols()));
  if (e.rows() == 1) return softmax_rows(e);
  return transpose(softmax_rows(transpose(e)));
}

Var transpose(Var x) {
  Tape& t = *x.tape;
  Matrix out = x.value().transpose();
  const std::size_t xi = x.id;
  return t.record("transpose", std::move(out), {x},
                  [xi](Tape& tp, const Matrix& g) { tp.accumulate(xi, g.transpose()); });
}

Var sum(Var x) {
  Tape& t = *x.tape;
  Matrix out = Matrix::Constant(1, 1, x.value().sum());
  const std::size_t xi = x.id;
  const Index r = x.rows(), c = x.cols();
  return t.record("sum", std::move(out), {x}, [xi, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var x) { return mul(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var row_sum(Var x) {
  Tape& t = *x.tape;
  Matrix out = x.value().rowwise().sum();
  const std::size_t xi = x.id;
  const Index c = x.cols();
  return t.record("row_sum", std::move(out), {x}, [xi, c](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, g.replicate(1, c));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = *parts.front().tape;
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows)
      throw DimensionError("concat_cols: row count mismatch " + shape_string(rows, 0) + " vs " +
                           shape_string(p.rows(), p.cols()));
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.cols();
  }
  return t.record("concat_cols", std::move(out), parts, [spans](Tape& tp, const Matrix& g) {
    for (const auto& [id, start] : spans) {
      const Matrix& v = tp.value(id);
      if (v.cols() == g.cols())
        tp.accumulate(id, g);
      else
        tp.accumulate(id, g.middleCols(start, v.cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape& t = *parts.front().tape;
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols)
      throw DimensionError("concat_rows: column count mismatch " + shape_string(0, cols) + " vs " +
                           shape_string(p.rows(), p.cols()));
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.rows();
  }
  return t.record("concat_rows", std::move(out), parts, [spans](Tape& tp, const Matrix& g) {
    for (const auto& [id, start] : spans) tp.accumulate(id, g.middleRows(start, tp.value(id).rows()));
  });
}

Var gather_rows(Var x, std::vector<Index> rows) {
  Tape& t = *x.tape;
  const Matrix& v = x.value();
  Matrix out(static_cast<Index>(rows.size()), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= v.rows())
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                           shape_string(v.rows(), v.cols()));
    out.row(static_cast<Index>(i)) = v.row(rows[i]);
  }
  const std::size_t xi = x.id;
  return t.record("gather_rows", std::move(out), {x}, [xi, rows = std::move(rows)](Tape& tp, const Matrix& g) {
    for (std::size_t i = 0; i < rows.size(); ++i) tp.accumulate_block(xi, rows[i], 0, g.row(static_cast<Index>(i)));
  });
}

Var slice_rows(Var x, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > x.rows())
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_string(x.rows(), x.cols()));
  Tape& t = *x.tape;
  Matrix out = x.value().middleRows(start, count);
  const std::size_t xi = x.id;
  return t.record("slice_rows", std::move(out), {x},
                  [xi, start](Tape& tp, const Matrix& g) { tp.accumulate_block(xi, start, 0, g); });
}

Var slice_cols(Var x, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > x.cols())
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_string(x.rows(), x.cols()));
  Tape& t = *x.tape;
  Matrix out = x.value().middleCols(start, count);
  const std::size_t xi = x.id;
  return t.record("slice_cols", std::move(out), {x},
                  [xi, start](Tape& tp, const Matrix& g) { tp.accumulate_block(xi, 0, start, g); });
}

Var add_row(Var x, Var row) {
  Tape& t = tape_of(x, row);
  if (row.rows() != 1 || row.cols() != x.cols())
    throw DimensionError("add_row: expected a 1x" + std::to_string(x.cols()) + " row, got " +
                         shape_string(row.rows(), row.cols()));
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  const std::size_t xi = x.id, ri = row.id;
  return t.record("add_row", std::move(out), {x, row}, [xi, ri](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, g);
    if (tp.needs_grad(ri)) tp.accumulate(ri, g.colwise().sum());
  });
}

Var conv1d(Var x, Var kernel, Var bias) {
  Tape& t = tape_of(x, kernel);
  const Index n = x.rows();
  const Index c_in = x.cols();
  const Index width = kernel.rows();
  if (width % 2 == 0) throw DimensionError("conv1d: kernel width must be odd, got " + std::to_string(width));
  if (kernel.cols() % c_in != 0)
    throw DimensionError("conv1d: kernel " + shape_string(kernel.rows(), kernel.cols()) +
                         " incompatible with input " + shape_string(n, c_in));
  const Index c_out = kernel.cols() / c_in;
  if (bias.rows() != 1 || bias.cols() != c_out)
    throw DimensionError("conv1d: bias " + shape_string(bias.rows(), bias.cols()) + " does not match " +
                         std::to_string(c_out) + " output channels");
  const Index pad = width / 2;

  // Output rows [t0, t1) receive input rows [t0 + tap - pad, t1 + tap - pad).
  auto tap_range = [n, pad](Index tap) {
    const Index shift = tap - pad;
    const Index t0 = std::max<Index>(0, -shift);
    const Index t1 = std::min<Index>(n, n - shift);
    return std::tuple{t0, t1, shift};
  };

  const Matrix& xv = x.value();
  const Matrix& kv = kernel.value();
  Matrix out = bias.value().replicate(n, 1);
  for (Index tap = 0; tap < width; ++tap) {
    const auto [t0, t1, shift] = tap_range(tap);
    if (t1 <= t0) continue;
    Eigen::Map<const Matrix> k_tap(kv.row(tap).data(), c_in, c_out);
    out.middleRows(t0, t1 - t0).noalias() += xv.middleRows(t0 + shift, t1 - t0) * k_tap;
  }

  const std::size_t xi = x.id, ki = kernel.id, bi = bias.id;
  return t.record("conv1d", std::move(out), {x, kernel, bias},
                  [xi, ki, bi, width, c_in, c_out, tap_range](Tape& tp, const Matrix& g) {
                    const Matrix& xv = tp.value(xi);
                    const Matrix& kv = tp.value(ki);
                    const bool want_x = tp.needs_grad(xi);
                    const bool want_k = tp.needs_grad(ki);
                    Matrix dx = want_x ? Matrix::Zero(xv.rows(), xv.cols()) : Matrix();
                    Matrix dk = want_k ? Matrix::Zero(kv.rows(), kv.cols()) : Matrix();
                    for (Index tap = 0; tap < width; ++tap) {
                      const auto [t0, t1, shift] = tap_range(tap);
                      if (t1 <= t0) continue;
                      Eigen::Map<const Matrix> k_tap(kv.row(tap).data(), c_in, c_out);
                      if (want_x)
                        dx.middleRows(t0 + shift, t1 - t0).noalias() += g.middleRows(t0, t1 - t0) * k_tap.transpose();
                      if (want_k) {
                        Eigen::Map<Matrix> dk_tap(dk.row(tap).data(), c_in, c_out);
                        dk_tap.noalias() += xv.middleRows(t0 + shift, t1 - t0).transpose() * g.middleRows(t0, t1 - t0);
                      }
                    }
                    if (want_x) tp.accumulate(xi, dx);
                    if (want_k) tp.accumulate(ki, dk);
                    if (tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                  });
}

// ---- gradient checking ----------------------------------------------------

namespace {

Matrix check_weights(Index rows, Index cols) {
  Matrix w(rows, cols);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
  return w;
}

double weighted_output(const TapeFunction& f, const Matrix& x) {
  Tape tape;
  Var xv = tape.constant(x);
  Var y = f(tape, xv);
  const Matrix& out = y.value();
  if (!out.allFinite()) throw DomainError("grad_check: f(x) is not finite");
  return out.cwiseProduct(check_weights(out.rows(), out.cols())).sum();
}

}  // namespace

double grad_check(const TapeFunction& f, const Matrix& x, double h) {
  if (!(h > 0)) throw DomainError("grad_check: step must be positive");
  Tensor input = Tensor::from_matrix(x, true);
  Tape tape;
  Var xv = tape.leaf(input);
  Var y = f(tape, xv);
  if (!y.value().allFinite()) throw DomainError("grad_check: f(x) is not finite");
  Var w = tape.constant(check_weights(y.rows(), y.cols()));
  tape.backward(sum(mul(y, w)));
  const Matrix& analytic = input.grad();

  double worst = 0.0;
  Matrix probe = x;
  for (Index i = 0; i < probe.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = weighted_output(f, probe);
    probe.data()[i] = orig - h;
    const double down = weighted_output(f, probe);
    probe.data()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace mtad
