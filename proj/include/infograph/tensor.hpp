#pragma once

// Dense-matrix reverse-mode differentiation. Every Tensor is a handle to a
// tape node; operations record their inputs and a backward closure, and
// Tensor::backward() walks the recorded graph in reverse topological order.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "infograph/error.hpp"
#include "infograph/rng.hpp"

namespace infograph {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // null for leaves

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Matrix value, bool requires_grad = false, std::string name = {})
      : node_(std::make_shared<detail::Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
  }

  static Tensor parameter(Matrix value, std::string name) {
    return Tensor(std::move(value), true, std::move(name));
  }

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

  static Tensor scalar(double v, bool requires_grad = false) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m), requires_grad);
  }

  static Tensor zeros(Eigen::Index rows, Eigen::Index cols) {
    return Tensor(Matrix::Zero(rows, cols));
  }

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::string shape() const { return shape_str(rows(), cols()); }
  const std::string& name() const { return node_->name; }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }

  const Matrix& value() const { return node_->value; }
  // Direct write access for optimizers and checkpoint loading.
  Matrix& mutable_value() { return node_->value; }

  double item() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("item() on non-scalar tensor " + shape());
    return node_->value(0, 0);
  }

  bool has_grad() const { return node_->grad.size() != 0; }

  // Zero-filled when nothing has been accumulated yet.
  Matrix grad() const {
    if (!has_grad()) return Matrix::Zero(rows(), cols());
    return node_->grad;
  }

  void zero_grad() { node_->grad = Matrix::Zero(rows(), cols()); }

  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

  friend Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds an op output. The tape entry is kept only when some input needs a
// gradient and recording is enabled.
inline Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                          std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(value));
  bool needs = false;
  if (detail::grad_mode_flag()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

inline void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("backward() requires a 1x1 loss, got " + shape());
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-call scratch; only leaves accumulate across calls.
  for (detail::Node* n : order) {
    if (n->backward) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape() + " x " + b.shape());
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](detail::Node& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) A.accumulate(self.grad * B.value.transpose());
    if (B.requires_grad) B.accumulate(A.value.transpose() * self.grad);
  });
}

inline Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](detail::Node& self) {
    self.inputs[0]->accumulate(self.grad.transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

inline bool is_scalar(const Tensor& t) { return t.rows() == 1 && t.cols() == 1; }

// Shape agreement for binary ops; a 1x1 operand broadcasts.
inline void check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_scalar(a) || is_scalar(b)) return;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

inline Matrix broadcast(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return Matrix::Constant(rows, cols, m(0, 0));
}

// Reduce an incoming gradient back to an operand's shape.
inline void accumulate_reduced(Node& target, const Matrix& g) {
  if (!target.requires_grad) return;
  if (target.value.rows() == g.rows() && target.value.cols() == g.cols()) {
    target.accumulate(g);
  } else {
    target.accumulate(Matrix::Constant(1, 1, g.sum()));
  }
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_binary("add", a, b);
  const auto r = std::max(a.rows(), b.rows());
  const auto c = std::max(a.cols(), b.cols());
  Matrix out = detail::broadcast(a.value(), r, c) + detail::broadcast(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](detail::Node& self) {
    detail::accumulate_reduced(*self.inputs[0], self.grad);
    detail::accumulate_reduced(*self.inputs[1], self.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_binary("sub", a, b);
  const auto r = std::max(a.rows(), b.rows());
  const auto c = std::max(a.cols(), b.cols());
  Matrix out = detail::broadcast(a.value(), r, c) - detail::broadcast(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](detail::Node& self) {
    detail::accumulate_reduced(*self.inputs[0], self.grad);
    detail::accumulate_reduced(*self.inputs[1], -self.grad);
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_binary("mul", a, b);
  const auto r = std::max(a.rows(), b.rows());
  const auto c = std::max(a.cols(), b.cols());
  Matrix out = detail::broadcast(a.value(), r, c).cwiseProduct(detail::broadcast(b.value(), r, c));
  return make_result(std::move(out), {a, b}, [r, c](detail::Node& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) {
      detail::accumulate_reduced(A, self.grad.cwiseProduct(detail::broadcast(B.value, r, c)));
    }
    if (B.requires_grad) {
      detail::accumulate_reduced(B, self.grad.cwiseProduct(detail::broadcast(A.value, r, c)));
    }
  });
}

// x + row, with a 1xC row broadcast over every row of x (linear-layer bias).
inline Tensor add_row(const Tensor& x, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(x.cols()) + " row, got " + row.shape());
  }
  Matrix out = x.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {x, row}, [](detail::Node& self) {
    self.inputs[0]->accumulate(self.grad);
    auto& R = *self.inputs[1];
    if (R.requires_grad) R.accumulate(self.grad.colwise().sum());
  });
}

inline Tensor scale(const Tensor& x, double factor) {
  Matrix out = x.value() * factor;
  return make_result(std::move(out), {x}, [factor](detail::Node& self) {
    self.inputs[0]->accumulate(self.grad * factor);
  });
}

inline Tensor negate(const Tensor& x) { return scale(x, -1.0); }

inline Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  return make_result(std::move(out), {x}, [](detail::Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(self.grad.cwiseProduct(
        X.value.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

// log(1 + e^z) in the overflow-free form max(z,0) + log1p(e^-|z|).
inline Tensor softplus(const Tensor& x) {
  Matrix out = x.value().unaryExpr([](double z) { return detail::softplus(z); });
  return make_result(std::move(out), {x}, [](detail::Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(self.grad.cwiseProduct(X.value.unaryExpr([](double z) { return detail::sigmoid(z); })));
  });
}

inline Tensor square(const Tensor& x) {
  Matrix out = x.value().cwiseAbs2();
  return make_result(std::move(out), {x}, [](detail::Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(2.0 * self.grad.cwiseProduct(X.value));
  });
}

// ---------------------------------------------------------------------------
// Reductions and structure

inline Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_result(std::move(out), {x}, [](detail::Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(Matrix::Constant(X.value.rows(), X.value.cols(), self.grad(0, 0)));
  });
}

inline Tensor mean(const Tensor& x) {
  const auto count = static_cast<double>(x.rows() * x.cols());
  if (count == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / count);
}

inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto rows = parts[0].rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + parts[0].shape() + " vs " + p.shape());
    }
    total += p.cols();
  }
  Matrix out(rows, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [offsets](detail::Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      auto& in = *self.inputs[i];
      if (in.requires_grad) in.accumulate(self.grad.middleCols(offsets[i], in.value.cols()));
    }
  });
}

inline Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

// Row s of the result is the sum of the rows x[i] with segment[i] == s.
inline Tensor segment_sum(const Tensor& x, std::span<const int> segment, int segments) {
  if (segments < 1) throw IndexError("segment_sum: segment count must be >= 1");
  if (static_cast<Eigen::Index>(segment.size()) != x.rows()) {
    throw ShapeError("segment_sum: " + std::to_string(segment.size()) + " segment ids for " +
                     x.shape() + " input");
  }
  Matrix out = Matrix::Zero(segments, x.cols());
  const Matrix& xv = x.value();
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const int s = segment[i];
    if (s < 0 || s >= segments) {
      throw IndexError("segment_sum: id " + std::to_string(s) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(segments) + ")");
    }
    out.row(s) += xv.row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> ids(segment.begin(), segment.end());
  return make_result(std::move(out), {x}, [ids = std::move(ids)](detail::Node& self) {
    auto& X = *self.inputs[0];
    Matrix g(X.value.rows(), X.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = self.grad.row(ids[i]);
    X.accumulate(g);
  });
}

// out[j] = x[index[j]].
inline Tensor gather_rows(const Tensor& x, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t j = 0; j < index.size(); ++j) {
    const int r = index[j];
    if (r < 0 || r >= x.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(r) + " outside " + x.shape());
    }
    out.row(static_cast<Eigen::Index>(j)) = x.value().row(r);
  }
  std::vector<int> ids(index.begin(), index.end());
  return make_result(std::move(out), {x}, [ids = std::move(ids)](detail::Node& self) {
    auto& X = *self.inputs[0];
    Matrix g = Matrix::Zero(X.value.rows(), X.value.cols());
    for (std::size_t j = 0; j < ids.size(); ++j) g.row(ids[j]) += self.grad.row(static_cast<Eigen::Index>(j));
    X.accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Parameters and optimization

inline void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Gradients are left in place; the caller
// zeroes them before the next accumulation.
inline void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                     " slots for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.m[i].rows() != p.rows() || state.m[i].cols() != p.cols()) {
      throw ShapeError("adam_step: state shape " + shape_str(state.m[i].rows(), state.m[i].cols()) +
                       " does not match parameter '" + p.name() + "' " + p.shape());
    }
    if (p.has_grad() && !p.node()->grad.allFinite()) {
      throw NumericError("adam_step: non-finite gradient in parameter '" + p.name() + "'");
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Matrix g = p.grad();
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseAbs2();
    const double eps = state.eps;
    p.mutable_value().array() -=
        lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + eps);
  }
}

}  // namespace infograph
