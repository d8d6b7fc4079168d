#pragma once

// Dense tensors and a tape-based reverse-mode differentiator.
//
// Every value on a tape is a dense row-major matrix. Leaves reference
// externally owned Tensors; backward() accumulates into Tensor::grad().

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mtad/error.hpp"

namespace mtad {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = VectorX<double>;
using Shape = std::vector<Index>;

std::string shape_string(const Shape& shape);
std::string shape_string(Index rows, Index cols);

// N-d array of doubles. Storage is a matrix of shape[0] rows and
// product(rest) columns; rank-1 tensors are stored as a single row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, Matrix data, bool requires_grad = false);

  static Tensor from_matrix(Matrix data, bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  Index rank() const { return static_cast<Index>(shape_.size()); }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);

  // Present iff requires_grad(); same storage layout as data().
  const Matrix& grad() const;
  Matrix& grad();
  void zero_grad();

  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape shape_;
  Matrix data_;
  bool requires_grad_ = false;
  Matrix grad_;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  double scalar() const;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf referencing t; its gradient lands in t.grad() when t.requires_grad().
  // t must outlive the backward pass.
  Var leaf(Tensor& t);
  Var constant(Matrix value);
  Var constant(double value);

  // Records a primitive result. backward runs only if some operand needs a gradient.
  Var record(const char* op, Matrix value, std::initializer_list<Var> operands, BackwardFn backward);
  Var record(const char* op, Matrix value, std::span<const Var> operands, BackwardFn backward);

  void backward(Var loss);
  void reset();

  const Matrix& value(Var v) const;
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient of the last backward pass w.r.t. v; zeros if v did not receive one.
  Matrix grad(Var v) const;

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].needs_grad) return;
    Matrix& acc = grads_[id];
    if (acc.size() == 0)
      acc = g;
    else
      acc += g;
  }

  // Adds g into the block of the gradient starting at (row, col).
  template <typename Derived>
  void accumulate_block(std::size_t id, Index row, Index col, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].needs_grad) return;
    Matrix& acc = grads_[id];
    if (acc.size() == 0) acc = Matrix::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
    acc.block(row, col, g.rows(), g.cols()) += g;
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Matrix value;
    Tensor* leaf = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool consumed_ = false;
};

void backward(Tape& tape, Var loss);

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);

// Elementwise binary ops: identical shapes, or one side 1x1 (scalar broadcast).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add(Var a, double c);
Var mul(Var a, double c);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);

Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var leaky_relu(Var x, double slope);
Var relu(Var x);
Var clamp_min(Var x, double floor);

// Softmax over all entries of a row or column vector.
Var softmax(Var e);
// Softmax of each row independently.
Var softmax_rows(Var e);

Var transpose(Var x);
Var sum(Var x);
Var mean(Var x);
// Per-row sums, rows x 1.
Var row_sum(Var x);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::vector<Index> rows);
Var slice_rows(Var x, Index start, Index count);
Var slice_cols(Var x, Index start, Index count);
// Adds a 1 x cols row vector to every row of x.
Var add_row(Var x, Var row);

// Length-preserving temporal convolution with zero padding.
// x: n x c_in, kernel: width x (c_in * c_out) laid out [tap][in][out], bias: 1 x c_out.
Var conv1d(Var x, Var kernel, Var bias);

// ---- gradient checking ----------------------------------------------------

using TapeFunction = std::function<Var(Tape&, Var)>;

// Max over components of |analytic - central difference| / max(1, |analytic|).
// Tensor-valued f is reduced to a scalar through a fixed, non-uniform weighting
// so that outputs with constant sum (softmax) still exercise every gradient path.
double grad_check(const TapeFunction& f, const Matrix& x, double h = 1e-5);

}  // namespace mtad
