#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Calling backward() on
// a 1x1 result walks the record in reverse and accumulates gradients into
// the Parameter objects that entered the computation through Tape::param().
// A tape can be differentiated once.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace edgeorch::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

// Owns parameters; addresses stay stable as parameters are added.
class ParamStore {
 public:
  Parameter& add(std::string name, Index rows, Index cols);

  std::size_t tensors() const { return params_.size(); }
  std::size_t scalars() const;
  Parameter& at(std::size_t i) { return *params_.at(i); }
  const Parameter& at(std::size_t i) const { return *params_.at(i); }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  void zero_grad();
  // Copies values from a store with identical names and shapes.
  void assign(const ParamStore& other);
  bool all_finite() const;
  double grad_norm() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  Var constant(Matrix value);
  Var constant(double value);
  Var param(Parameter& p);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // loss must be 1x1. Throws ContractViolation on a second call.
  void backward(Var loss);

  // Used by operations to record a node. `back` receives the tape and the
  // node id; it reads grad(id) and accumulates into the inputs' grads.
  using Backward = std::function<void(Tape&, std::size_t)>;
  Var record(Matrix value, bool needs_grad, Backward back);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Lazily zero-initialised gradient buffer.
  Matrix& grad(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Arithmetic. `add`, `sub` broadcast b when it is 1x1 or a single row.
// `mul` is elementwise and broadcasts b when it is 1x1 or a single column.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var square(Var a);

// Elementwise nonlinearities.
Var leaky_relu(Var a, double slope = 0.2);
Var elu(Var a, double alpha = 1.0);
Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
// Gradient passes only strictly inside (lo, hi).
Var clamp(Var a, double lo, double hi);
Var minimum(Var a, Var b);

// Reductions and reshaping.
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);  // 1 x cols
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, const std::vector<std::size_t>& index);
// out[index[i]] += a[i]; out has `rows` rows.
Var scatter_add_rows(Var a, const std::vector<std::size_t>& index, std::size_t rows);
Var broadcast_rows(Var a, std::size_t rows);
Var element(Var a, Index row, Index col);

// Softmax of a column of edge scores within each segment (edges sharing a
// target node).
Var segment_softmax(Var scores, const std::vector<std::size_t>& segment, std::size_t segments);
// log-softmax over all entries of a.
Var log_softmax(Var a);

}  // namespace edgeorch::nn
