#include "edgeorch/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "edgeorch/errors.hpp"

namespace edgeorch::nn {

Parameter& ParamStore::add(std::string name, Index rows, Index cols) {
  if (find(name)) throw ContractViolation("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

std::size_t ParamStore::scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

void ParamStore::assign(const ParamStore& other) {
  if (other.params_.size() != params_.size()) throw ContractViolation("parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = *params_[i];
    const auto& src = *other.params_[i];
    if (dst.name != src.name || dst.value.rows() != src.value.rows() ||
        dst.value.cols() != src.value.cols())
      throw ContractViolation("parameter layout mismatch at " + dst.name);
    dst.value = src.value;
  }
}

bool ParamStore::all_finite() const {
  for (const auto& p : params_)
    if (!p->value.allFinite()) return false;
  return true;
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::record(Matrix value, bool needs_grad, Backward back) {
  if (consumed_) throw ContractViolation("tape already differentiated");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::param(Parameter& p) {
  Var v = record(p.value, true, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

Matrix& Tape::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw ContractViolation("backward called twice on one tape");
  if (loss.tape != this) throw ContractViolation("loss belongs to another tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw ContractViolation("loss must be a scalar");
  consumed_ = true;
  if (!nodes_[loss.id].needs_grad) return;
  grad(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.back) {
      n.back(*this, i);
    }
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractViolation("uninitialised variable");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractViolation("operands on different tapes");
}

[[noreturn]] void shape_error(const char* op, Var a, Var b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x"
     << b.cols();
  throw ContractViolation(os.str());
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class F, class D>
Var unary(Var a, F f, D d) {
  Tape& t = tape_of(a);
  Matrix y = a.value().unaryExpr(f);
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, d](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (Index k = 0; k < x.size(); ++k) ga.data()[k] += g.data()[k] * d(x.data()[k], y.data()[k]);
  });
}

enum class Broadcast { none, scalar, row, col };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, bool allow_row, bool allow_col) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (allow_row && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (allow_col && b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ContractViolation("broadcast");
}

// Sum a full-size gradient down to b's broadcast shape.
void reduce_into(Matrix& gb, const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::none: gb += g; break;
    case Broadcast::scalar: gb(0, 0) += g.sum(); break;
    case Broadcast::row: gb += g.colwise().sum(); break;
    case Broadcast::col: gb += g.rowwise().sum(); break;
  }
}

Var add_impl(Var a, Var b, double sign, const char* op) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  Broadcast kind;
  try {
    kind = broadcast_kind(A, B, true, false);
  } catch (const ContractViolation&) {
    shape_error(op, a, b);
  }
  Matrix y = A;
  switch (kind) {
    case Broadcast::none: y += sign * B; break;
    case Broadcast::scalar: y.array() += sign * B(0, 0); break;
    case Broadcast::row: y.rowwise() += sign * B.row(0); break;
    case Broadcast::col: break;
  }
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = t.needs_grad(ia) || t.needs_grad(ib);
  return t.record(std::move(y), ng, [ia, ib, sign, kind](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) {
      if (sign > 0) {
        reduce_into(t.grad(ib), g, kind);
      } else {
        Matrix ng = -g;
        reduce_into(t.grad(ib), ng, kind);
      }
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Tape& t = tape_of(a);
  Matrix y = a.value() * b.value();
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = t.needs_grad(ia) || t.needs_grad(ib);
  return t.record(std::move(y), ng, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  Broadcast kind;
  try {
    kind = broadcast_kind(A, B, false, true);
  } catch (const ContractViolation&) {
    shape_error("mul", a, b);
  }
  Matrix y;
  switch (kind) {
    case Broadcast::none: y = A.cwiseProduct(B); break;
    case Broadcast::scalar: y = A * B(0, 0); break;
    case Broadcast::col: y = A.array().colwise() * B.col(0).array(); break;
    case Broadcast::row: break;
  }
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = t.needs_grad(ia) || t.needs_grad(ib);
  return t.record(std::move(y), ng, [ia, ib, kind](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& A = t.value(ia);
    const Matrix& B = t.value(ib);
    if (t.needs_grad(ia)) {
      switch (kind) {
        case Broadcast::none: t.grad(ia) += g.cwiseProduct(B); break;
        case Broadcast::scalar: t.grad(ia) += g * B(0, 0); break;
        case Broadcast::col: t.grad(ia).array() += g.array().colwise() * B.col(0).array(); break;
        case Broadcast::row: break;
      }
    }
    if (t.needs_grad(ib)) {
      Matrix prod = g.cwiseProduct(A);
      reduce_into(t.grad(ib), prod, kind);
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id;
  return t.record(a.value() * s, t.needs_grad(ia),
                  [ia, s](Tape& t, std::size_t self) { t.grad(ia) += t.grad(self) * s; });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id;
  Matrix y = a.value().array() + s;
  return t.record(std::move(y), t.needs_grad(ia),
                  [ia](Tape& t, std::size_t self) { t.grad(ia) += t.grad(self); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var elu(Var a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var minimum(Var a, Var b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("minimum", a, b);
  Tape& t = tape_of(a);
  Matrix y = a.value().cwiseMin(b.value());
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = t.needs_grad(ia) || t.needs_grad(ib);
  return t.record(std::move(y), ng, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& A = t.value(ia);
    const Matrix& B = t.value(ib);
    for (Index k = 0; k < g.size(); ++k) {
      const bool left = A.data()[k] <= B.data()[k];
      if (left && t.needs_grad(ia)) t.grad(ia).data()[k] += g.data()[k];
      if (!left && t.needs_grad(ib)) t.grad(ib).data()[k] += g.data()[k];
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id;
  return t.record(Matrix::Constant(1, 1, a.value().sum()), t.needs_grad(ia),
                  [ia](Tape& t, std::size_t self) { t.grad(ia).array() += t.grad(self)(0, 0); });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ContractViolation("mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ContractViolation("mean_rows of an empty matrix");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id;
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix y = a.value().colwise().sum() * inv;
  return t.record(std::move(y), t.needs_grad(ia), [ia, inv](Tape& t, std::size_t self) {
    t.grad(ia).rowwise() += t.grad(self).row(0) * inv;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols of nothing");
  Tape& t = tape_of(parts[0]);
  const Index rows = parts[0].rows();
  Index cols = 0;
  bool ng = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != rows) shape_error("concat_cols", parts[0], p);
    cols += p.cols();
    ng = ng || t.needs_grad(p.id);
    ids.push_back(p.id);
  }
  Matrix y(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(y), ng, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Index c = 0;
    for (auto id : ids) {
      const Index w = t.value(id).cols();
      if (t.needs_grad(id)) t.grad(id) += g.middleCols(c, w);
      c += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows of nothing");
  Tape& t = tape_of(parts[0]);
  const Index cols = parts[0].cols();
  Index rows = 0;
  bool ng = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.cols() != cols) shape_error("concat_rows", parts[0], p);
    rows += p.rows();
    ng = ng || t.needs_grad(p.id);
    ids.push_back(p.id);
  }
  Matrix y(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.record(std::move(y), ng, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Index r = 0;
    for (auto id : ids) {
      const Index h = t.value(id).rows();
      if (t.needs_grad(id)) t.grad(id) += g.middleRows(r, h);
      r += h;
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& index) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  Matrix y(static_cast<Index>(index.size()), A.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (static_cast<Index>(index[i]) >= A.rows()) throw ContractViolation("gather_rows: index out of range");
    y.row(Index(i)) = A.row(Index(index[i]));
  }
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, index](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(Index(index[i])) += g.row(Index(i));
  });
}

Var scatter_add_rows(Var a, const std::vector<std::size_t>& index, std::size_t rows) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  if (static_cast<Index>(index.size()) != A.rows()) throw ContractViolation("scatter_add_rows: index size");
  Matrix y = Matrix::Zero(Index(rows), A.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw ContractViolation("scatter_add_rows: index out of range");
    y.row(Index(index[i])) += A.row(Index(i));
  }
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, index](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(Index(i)) += g.row(Index(index[i]));
  });
}

Var broadcast_rows(Var a, std::size_t rows) {
  if (a.rows() != 1) throw ContractViolation("broadcast_rows expects a single row");
  Tape& t = tape_of(a);
  Matrix y = a.value().replicate(Index(rows), 1);
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia](Tape& t, std::size_t self) {
    t.grad(ia) += t.grad(self).colwise().sum();
  });
}

Var element(Var a, Index row, Index col) {
  if (row < 0 || col < 0 || row >= a.rows() || col >= a.cols()) throw ContractViolation("element out of range");
  Tape& t = tape_of(a);
  const std::size_t ia = a.id;
  return t.record(Matrix::Constant(1, 1, a.value()(row, col)), t.needs_grad(ia),
                  [ia, row, col](Tape& t, std::size_t self) { t.grad(ia)(row, col) += t.grad(self)(0, 0); });
}

Var segment_softmax(Var scores, const std::vector<std::size_t>& segment, std::size_t segments) {
  if (scores.cols() != 1 || scores.rows() != static_cast<Index>(segment.size()))
    throw ContractViolation("segment_softmax expects one score per edge");
  Tape& t = tape_of(scores);
  const Matrix& s = scores.value();
  std::vector<double> peak(segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < segment.size(); ++e) {
    if (segment[e] >= segments) throw ContractViolation("segment_softmax: segment out of range");
    peak[segment[e]] = std::max(peak[segment[e]], s(Index(e), 0));
  }
  Matrix y(s.rows(), 1);
  std::vector<double> total(segments, 0.0);
  for (std::size_t e = 0; e < segment.size(); ++e) {
    y(Index(e), 0) = std::exp(s(Index(e), 0) - peak[segment[e]]);
    total[segment[e]] += y(Index(e), 0);
  }
  for (std::size_t e = 0; e < segment.size(); ++e) y(Index(e), 0) /= total[segment[e]];
  const std::size_t ia = scores.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia, segment, segments](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    std::vector<double> dot(segments, 0.0);
    for (std::size_t e = 0; e < segment.size(); ++e) dot[segment[e]] += y(Index(e), 0) * g(Index(e), 0);
    Matrix& ga = t.grad(ia);
    for (std::size_t e = 0; e < segment.size(); ++e)
      ga(Index(e), 0) += y(Index(e), 0) * (g(Index(e), 0) - dot[segment[e]]);
  });
}

Var log_softmax(Var a) {
  if (a.value().size() == 0) throw ContractViolation("log_softmax of an empty matrix");
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const double peak = x.maxCoeff();
  const double lse = peak + std::log((x.array() - peak).exp().sum());
  Matrix y = x.array() - lse;
  const std::size_t ia = a.id;
  return t.record(std::move(y), t.needs_grad(ia), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const double gs = g.sum();
    t.grad(ia).array() += g.array() - y.array().exp() * gs;
  });
}

}  // namespace edgeorch::nn
