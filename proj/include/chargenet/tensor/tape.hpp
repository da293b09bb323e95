#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "chargenet/tensor/parameter.hpp"
#include "chargenet/tensor/tensor.hpp"

namespace chargenet {

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
};

inline constexpr double kLogClamp = 1e-12;

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Max-subtracted softmax over a plain vector.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of an empty vector");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// -sum_i target_i * log(max(predicted_i, 1e-12)).
inline double cross_entropy(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) {
    throw ShapeError("cross_entropy length mismatch: " + std::to_string(target.size()) + " vs " +
                     std::to_string(predicted.size()));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::clamp(predicted[i], kLogClamp, 1.0));
  }
  return loss;
}

/// Reverse-mode tape. Operations are appended in evaluation order, so the
/// record is topologically sorted by construction; `backward` walks it in
/// exact reverse. A tape supports a single backward pass.
class Tape {
 public:
  /// Backward rule of a user-supplied primitive: accumulate into `input_grads`
  /// (one span per input, already zero-initialised or holding earlier sums).
  using CustomBackward = std::function<void(const std::vector<const Tensor*>& inputs, const Tensor& output,
                                            std::span<const double> output_grad,
                                            std::vector<std::span<double>>& input_grads)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves -------------------------------------------------------------

  Var constant(Tensor value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Leaf bound to a trainable parameter; repeated calls return the same node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.op = Op::Param;
    n.param = &p;
    n.requires_grad = true;
    Var v = push(std::move(n));
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  /// Row `row` of a rank-2 parameter (embedding lookup). Gradient is added
  /// straight into that row of the table's grad.
  Var lookup(Parameter& table, std::size_t row) {
    if (table.value.rank() != 2 || row >= table.value.rows()) {
      throw ShapeError("lookup row " + std::to_string(row) + " outside table " +
                       shape_string(table.value.shape()));
    }
    const std::size_t width = table.value.cols();
    std::vector<double> data(table.value.data().begin() + static_cast<std::ptrdiff_t>(row * width),
                             table.value.data().begin() + static_cast<std::ptrdiff_t>((row + 1) * width));
    Node n;
    n.op = Op::Lookup;
    n.param = &table;
    n.aux = row;
    n.value = Tensor({width}, std::move(data));
    n.requires_grad = true;
    lookup_tables_.push_back(&table);
    return push(std::move(n));
  }

  // ---- primitives ---------------------------------------------------------

  /// [m x n] * [n x p] -> [m x p], or [m x n] * [n] -> [m].
  Var matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() > 2 || A.cols() != B.shape()[0]) {
      throw ShapeError("matmul shape mismatch: " + shape_string(A.shape()) + " * " + shape_string(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols();
    Tensor out;
    if (B.rank() == 1) {
      std::vector<double> o(m, 0.0);
      const double* ap = A.data().data();
      const double* bp = B.data().data();
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        const double* row = ap + i * k;
        for (std::size_t j = 0; j < k; ++j) s += row[j] * bp[j];
        o[i] = s;
      }
      out = Tensor({m}, std::move(o));
    } else {
      const std::size_t p = B.cols();
      std::vector<double> o(m * p, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double aij = A.at(i, j);
          for (std::size_t c = 0; c < p; ++c) o[i * p + c] += aij * B.at(j, c);
        }
      out = Tensor({m, p}, std::move(o));
    }
    return push_op(Op::MatMul, {a, b}, std::move(out));
  }

  Var add(Var a, Var b) { return binary(Op::Add, a, b, [](double x, double y) { return x + y; }); }
  Var sub(Var a, Var b) { return binary(Op::Sub, a, b, [](double x, double y) { return x - y; }); }
  Var mul(Var a, Var b) { return binary(Op::Mul, a, b, [](double x, double y) { return x * y; }); }

  Var scale(Var a, double factor) {
    Tensor out = value(a);
    for (double& v : out.data()) v *= factor;
    Var r = push_op(Op::Scale, {a}, std::move(out));
    nodes_[r.id].scalar = factor;
    return r;
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (double& v : out.data()) v = std::tanh(v);
    return push_op(Op::Tanh, {a}, std::move(out));
  }

  Var sigmoid(Var a) {
    Tensor out = value(a);
    for (double& v : out.data()) v = stable_sigmoid(v);
    return push_op(Op::Sigmoid, {a}, std::move(out));
  }

  /// Concatenation of rank-1 tensors.
  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DomainError("concat of an empty list");
    std::vector<double> data;
    for (Var p : parts) {
      const Tensor& t = value(p);
      if (t.rank() != 1) throw ShapeError("concat expects rank-1 tensors, got " + shape_string(t.shape()));
      data.insert(data.end(), t.data().begin(), t.data().end());
    }
    const std::size_t n = data.size();
    return push_op(Op::Concat, parts, Tensor({n}, std::move(data)));
  }

  Var dot(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 1 || A.shape() != B.shape()) {
      throw ShapeError("dot shape mismatch: " + shape_string(A.shape()) + " . " + shape_string(B.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * B[i];
    return push_op(Op::Dot, {a, b}, Tensor::scalar(s));
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double v : value(a).data()) s += v;
    return push_op(Op::Sum, {a}, Tensor::scalar(s));
  }

  Var softmax(Var a) {
    const Tensor& x = value(a);
    if (x.rank() != 1) throw ShapeError("softmax expects a vector, got " + shape_string(x.shape()));
    std::vector<double> out = chargenet::softmax(x.data());
    const std::size_t n = out.size();
    return push_op(Op::Softmax, {a}, Tensor({n}, std::move(out)));
  }

  /// sum_t weights[t] * states[t].
  Var weighted_sum(Var weights, const std::vector<Var>& states) {
    const Tensor& w = value(weights);
    if (states.empty()) throw DomainError("weighted_sum over an empty list");
    if (w.rank() != 1 || w.size() != states.size()) {
      throw ShapeError("weighted_sum: " + std::to_string(states.size()) + " states but weights " +
                       shape_string(w.shape()));
    }
    const Shape& s0 = value(states[0]).shape();
    std::vector<double> out(shape_size(s0), 0.0);
    for (std::size_t t = 0; t < states.size(); ++t) {
      const Tensor& h = value(states[t]);
      if (h.shape() != s0) throw ShapeError("weighted_sum states differ in shape");
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[t] * h[i];
    }
    std::vector<Var> args{weights};
    args.insert(args.end(), states.begin(), states.end());
    return push_op(Op::WeightedSum, args, Tensor(s0, std::move(out)));
  }

  /// Cross entropy of a fixed target distribution against `predicted`, with
  /// predicted values clamped to [1e-12, 1] inside the log.
  Var cross_entropy(const Tensor& target, Var predicted) {
    const Tensor& p = value(predicted);
    if (target.shape() != p.shape()) {
      throw ShapeError("cross_entropy shape mismatch: " + shape_string(target.shape()) + " vs " +
                       shape_string(p.shape()));
    }
    const double loss = chargenet::cross_entropy(target.data(), p.data());
    Var t = constant(target);
    return push_op(Op::CrossEntropy, {t, predicted}, Tensor::scalar(loss));
  }

  /// Stacks equally sized rank-1 tensors as the rows of a matrix.
  Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw DomainError("stack_rows of an empty list");
    const Shape& s0 = value(rows[0]).shape();
    if (s0.size() != 1) throw ShapeError("stack_rows expects rank-1 tensors, got " + shape_string(s0));
    std::vector<double> data;
    data.reserve(rows.size() * s0[0]);
    for (Var r : rows) {
      const Tensor& t = value(r);
      if (t.shape() != s0) throw ShapeError("stack_rows: " + shape_string(t.shape()) + " vs " + shape_string(s0));
      data.insert(data.end(), t.data().begin(), t.data().end());
    }
    return push_op(Op::StackRows, rows, Tensor({rows.size(), s0[0]}, std::move(data)));
  }

  /// A [m x k] * B^T for B [n x k] -> [m x n].
  Var matmul_transposed(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols()) {
      throw ShapeError("matmul_transposed shape mismatch: " + shape_string(A.shape()) + " * " +
                       shape_string(B.shape()) + "^T");
    }
    const std::size_t m = A.rows(), n = B.rows(), k = A.cols();
    std::vector<double> o(m * n);
    const double* ap = A.data().data();
    const double* bp = B.data().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += ap[i * k + c] * bp[j * k + c];
        o[i * n + j] = s;
      }
    return push_op(Op::MatMulNT, {a, b}, Tensor({m, n}, std::move(o)));
  }

  /// A^T * v for A [m x n], v [m] -> [n].
  Var matvec_transposed(Var a, Var v) {
    const Tensor& A = value(a);
    const Tensor& x = value(v);
    if (A.rank() != 2 || x.rank() != 1 || A.rows() != x.size()) {
      throw ShapeError("matvec_transposed shape mismatch: " + shape_string(A.shape()) + "^T * " +
                       shape_string(x.shape()));
    }
    const std::size_t m = A.rows(), n = A.cols();
    std::vector<double> o(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) o[j] += A.at(i, j) * x[i];
    return push_op(Op::MatVecT, {a, v}, Tensor({n}, std::move(o)));
  }

  /// Gate weights of one GRU cell, in the order W_z U_z b_z W_r U_r b_r W_h U_h b_h.
  struct GruWeights {
    Var W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h;
  };

  /// Fused GRU update:
  ///   z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r),
  ///   c = tanh(W_h x + U_h (r*h) + b_h), h' = (1 - z) * h + z * c.
  Var gru_cell(Var x, Var h, const GruWeights& w) {
    const Tensor& X = value(x);
    const Tensor& Hp = value(h);
    const Tensor& Wz = value(w.W_z);
    const std::size_t H = Wz.rows(), I = Wz.cols();
    auto check = [&](Var v, const Shape& expected, const char* what) {
      if (value(v).shape() != expected) {
        throw ShapeError(std::string("gru_cell ") + what + " has shape " + shape_string(value(v).shape()) +
                         ", expected " + shape_string(expected));
      }
    };
    check(x, {I}, "input");
    check(h, {H}, "state");
    check(w.W_r, {H, I}, "W_r");
    check(w.W_h, {H, I}, "W_h");
    check(w.U_z, {H, H}, "U_z");
    check(w.U_r, {H, H}, "U_r");
    check(w.U_h, {H, H}, "U_h");
    check(w.b_z, {H}, "b_z");
    check(w.b_r, {H}, "b_r");
    check(w.b_h, {H}, "b_h");

    // saved = [z | r | c | r*h]
    std::vector<double> saved(4 * H);
    double* z = saved.data();
    double* r = z + H;
    double* c = r + H;
    double* rh = c + H;
    const double* xp = X.data().data();
    const double* hp = Hp.data().data();
    auto affine = [&](Var Wv, Var Uv, Var bv, const double* hin, std::size_t i) {
      const double* wr = value(Wv).data().data() + i * I;
      const double* ur = value(Uv).data().data() + i * H;
      double s = value(bv)[i];
      for (std::size_t j = 0; j < I; ++j) s += wr[j] * xp[j];
      for (std::size_t j = 0; j < H; ++j) s += ur[j] * hin[j];
      return s;
    };
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = stable_sigmoid(affine(w.W_z, w.U_z, w.b_z, hp, i));
      r[i] = stable_sigmoid(affine(w.W_r, w.U_r, w.b_r, hp, i));
    }
    for (std::size_t i = 0; i < H; ++i) rh[i] = r[i] * hp[i];
    std::vector<double> out(H);
    for (std::size_t i = 0; i < H; ++i) {
      c[i] = std::tanh(affine(w.W_h, w.U_h, w.b_h, rh, i));
      out[i] = hp[i] + z[i] * (c[i] - hp[i]);
    }
    Var result = push_op(Op::GruCell, {x, h, w.W_z, w.U_z, w.b_z, w.W_r, w.U_r, w.b_r, w.W_h, w.U_h, w.b_h},
                         Tensor({H}, std::move(out)));
    nodes_[result.id].saved = std::move(saved);
    return result;
  }

  /// Records an operation whose forward value was computed by the caller.
  Var custom(const std::vector<Var>& inputs, Tensor output, CustomBackward rule) {
    Var r = push_op(Op::Custom, inputs, std::move(output));
    nodes_[r.id].aux = customs_.size();
    customs_.push_back(std::move(rule));
    return r;
  }

  // ---- access -------------------------------------------------------------

  const Tensor& value(Var v) const {
    const Node& n = node(v);
    return n.param && n.op == Op::Param ? n.param->value : n.value;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Gradient accumulated at a node during backward (empty if unreached).
  std::span<const double> grad(Var v) const { return node(v).grad; }

  /// Propagates d(loss)/d(node) for every recorded node and adds the
  /// parameter gradients into `Parameter::grad`. Parameters touched by this
  /// tape but not reachable from `loss` receive a zero gradient buffer.
  void backward(Var loss, double seed = 1.0) {
    if (consumed_) throw StateError("backward called twice on the same tape");
    if (value(loss).size() != 1) {
      throw DomainError("backward requires a scalar loss, got " + shape_string(value(loss).shape()));
    }
    consumed_ = true;
    nodes_[loss.id].grad.assign(1, seed);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      propagate(static_cast<std::uint32_t>(i));
    }
    for (auto& [param, id] : param_nodes_) {
      Tensor& g = param->ensure_grad();
      const auto& local = nodes_[id].grad;
      for (std::size_t j = 0; j < local.size(); ++j) g[j] += local[j];
    }
    for (Parameter* table : lookup_tables_) table->ensure_grad();
  }

 private:
  enum class Op : std::uint8_t {
    Constant, Param, Lookup, MatMul, Add, Sub, Mul, Scale, Tanh, Sigmoid,
    Concat, Dot, Sum, Softmax, WeightedSum, CrossEntropy, Custom,
    StackRows, MatMulNT, MatVecT, GruCell
  };

  struct Node {
    Op op = Op::Constant;
    bool requires_grad = false;
    std::uint32_t arg_begin = 0;
    std::uint32_t arg_count = 0;
    std::size_t aux = 0;
    double scalar = 0.0;
    Parameter* param = nullptr;
    Tensor value;
    std::vector<double> grad;
    std::vector<double> saved;  // forward intermediates kept for backward
  };

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
    return nodes_[v.id];
  }

  Var push(Node n) {
    if (consumed_) throw StateError("cannot record on a tape after backward");
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var push_op(Op op, std::initializer_list<Var> inputs, Tensor out) {
    return push_op(op, std::vector<Var>(inputs), std::move(out));
  }

  Var push_op(Op op, const std::vector<Var>& inputs, Tensor out) {
    Node n;
    n.op = op;
    n.arg_begin = static_cast<std::uint32_t>(args_.size());
    n.arg_count = static_cast<std::uint32_t>(inputs.size());
    for (Var v : inputs) {
      node(v);
      args_.push_back(v.id);
      n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    n.value = std::move(out);
    return push(std::move(n));
  }

  template <class F>
  Var binary(Op op, Var a, Var b, F f) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape() != B.shape()) {
      throw ShapeError("elementwise shape mismatch: " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(A[i], B[i]);
    return push_op(op, {a, b}, std::move(out));
  }

  std::uint32_t arg(const Node& n, std::size_t i) const { return args_[n.arg_begin + i]; }

  bool wants(std::uint32_t id) const { return nodes_[id].requires_grad; }

  std::span<double> grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(Var{id}).size(), 0.0);
    return n.grad;
  }

  void propagate(std::uint32_t id) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) return;
    const std::vector<double>& g = n.grad;
    switch (n.op) {
      case Op::Constant:
      case Op::Param:
        return;
      case Op::Lookup: {
        Tensor& tg = n.param->ensure_grad();
        const std::size_t width = n.value.size();
        for (std::size_t j = 0; j < width; ++j) tg[n.aux * width + j] += g[j];
        return;
      }
      case Op::MatMul: {
        const std::uint32_t ia = arg(n, 0), ib = arg(n, 1);
        const Tensor& A = value(Var{ia});
        const Tensor& B = value(Var{ib});
        const std::size_t m = A.rows(), k = A.cols();
        if (B.rank() == 1) {
          if (wants(ia)) {
            auto ga = grad_buffer(ia);
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              double* row = ga.data() + i * k;
              for (std::size_t j = 0; j < k; ++j) row[j] += gi * B[j];
            }
          }
          if (wants(ib)) {
            auto gb = grad_buffer(ib);
            const double* ap = A.data().data();
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              const double* row = ap + i * k;
              for (std::size_t j = 0; j < k; ++j) gb[j] += row[j] * gi;
            }
          }
        } else {
          const std::size_t p = B.cols();
          if (wants(ia)) {
            auto ga = grad_buffer(ia);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < p; ++c) s += g[i * p + c] * B.at(j, c);
                ga[i * k + j] += s;
              }
          }
          if (wants(ib)) {
            auto gb = grad_buffer(ib);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < k; ++j) {
                const double aij = A.at(i, j);
                for (std::size_t c = 0; c < p; ++c) gb[j * p + c] += aij * g[i * p + c];
              }
          }
        }
        return;
      }
      case Op::Add:
      case Op::Sub: {
        const std::uint32_t ia = arg(n, 0), ib = arg(n, 1);
        const double sign = n.op == Op::Add ? 1.0 : -1.0;
        if (wants(ia)) {
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(ib)) {
          auto gb = grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
        }
        return;
      }
      case Op::Mul: {
        const std::uint32_t ia = arg(n, 0), ib = arg(n, 1);
        const Tensor& A = value(Var{ia});
        const Tensor& B = value(Var{ib});
        if (wants(ia)) {
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        }
        if (wants(ib)) {
          auto gb = grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        }
        return;
      }
      case Op::Scale: {
        const std::uint32_t ia = arg(n, 0);
        auto ga = grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        return;
      }
      case Op::Tanh: {
        const std::uint32_t ia = arg(n, 0);
        auto ga = grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        return;
      }
      case Op::Sigmoid: {
        const std::uint32_t ia = arg(n, 0);
        auto ga = grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        return;
      }
      case Op::Concat: {
        std::size_t offset = 0;
        for (std::size_t a = 0; a < n.arg_count; ++a) {
          const std::uint32_t ia = arg(n, a);
          const std::size_t len = value(Var{ia}).size();
          if (wants(ia)) {
            auto ga = grad_buffer(ia);
            for (std::size_t i = 0; i < len; ++i) ga[i] += g[offset + i];
          }
          offset += len;
        }
        return;
      }
      case Op::Dot: {
        const std::uint32_t ia = arg(n, 0), ib = arg(n, 1);
        const Tensor& A = value(Var{ia});
        const Tensor& B = value(Var{ib});
        if (wants(ia)) {
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < A.size(); ++i) ga[i] += g[0] * B[i];
        }
        if (wants(ib)) {
          auto gb = grad_buffer(ib);
          for (std::size_t i = 0; i < B.size(); ++i) gb[i] += g[0] * A[i];
        }
        return;
      }
      case Op::Sum: {
        auto ga = grad_buffer(arg(n, 0));
        for (double& v : ga) v += g[0];
        return;
      }
      case Op::Softmax: {
        auto ga = grad_buffer(arg(n, 0));
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * n.value[i];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.value[i] * (g[i] - inner);
        return;
      }
      case Op::WeightedSum: {
        const std::uint32_t iw = arg(n, 0);
        const Tensor& w = value(Var{iw});
        std::span<double> gw;
        if (wants(iw)) gw = grad_buffer(iw);
        for (std::size_t t = 0; t + 1 < n.arg_count; ++t) {
          const std::uint32_t ih = arg(n, t + 1);
          const Tensor& h = value(Var{ih});
          if (!gw.empty()) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * h[i];
            gw[t] += s;
          }
          if (wants(ih)) {
            auto gh = grad_buffer(ih);
            for (std::size_t i = 0; i < g.size(); ++i) gh[i] += w[t] * g[i];
          }
        }
        return;
      }
      case Op::CrossEntropy: {
        const Tensor& target = value(Var{arg(n, 0)});
        const std::uint32_t ip = arg(n, 1);
        const Tensor& p = value(Var{ip});
        auto gp = grad_buffer(ip);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (target[i] != 0.0 && p[i] >= kLogClamp) gp[i] -= g[0] * target[i] / p[i];
        }
        return;
      }
      case Op::StackRows: {
        const std::size_t width = value(Var{arg(n, 0)}).size();
        for (std::size_t a = 0; a < n.arg_count; ++a) {
          const std::uint32_t ia = arg(n, a);
          if (!wants(ia)) continue;
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < width; ++i) ga[i] += g[a * width + i];
        }
        return;
      }
      case Op::MatMulNT: {
        const std::uint32_t ia = arg(n, 0), ib = arg(n, 1);
        const Tensor& A = value(Var{ia});
        const Tensor& B = value(Var{ib});
        const std::size_t m = A.rows(), nn = B.rows(), k = A.cols();
        if (wants(ia)) {
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nn; ++j) {
              const double gij = g[i * nn + j];
              for (std::size_t c = 0; c < k; ++c) ga[i * k + c] += gij * B.at(j, c);
            }
        }
        if (wants(ib)) {
          auto gb = grad_buffer(ib);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nn; ++j) {
              const double gij = g[i * nn + j];
              for (std::size_t c = 0; c < k; ++c) gb[j * k + c] += gij * A.at(i, c);
            }
        }
        return;
      }
      case Op::MatVecT: {
        const std::uint32_t ia = arg(n, 0), iv = arg(n, 1);
        const Tensor& A = value(Var{ia});
        const Tensor& x = value(Var{iv});
        const std::size_t m = A.rows(), nn = A.cols();
        if (wants(ia)) {
          auto ga = grad_buffer(ia);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nn; ++j) ga[i * nn + j] += x[i] * g[j];
        }
        if (wants(iv)) {
          auto gv = grad_buffer(iv);
          for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < nn; ++j) s += A.at(i, j) * g[j];
            gv[i] += s;
          }
        }
        return;
      }
      case Op::GruCell:
        gru_cell_backward(n);
        return;
      case Op::Custom: {
        std::vector<const Tensor*> inputs;
        std::vector<std::span<double>> grads;
        for (std::size_t a = 0; a < n.arg_count; ++a) {
          const std::uint32_t ia = arg(n, a);
          inputs.push_back(&value(Var{ia}));
          grads.push_back(grad_buffer(ia));
        }
        customs_[n.aux](inputs, n.value, g, grads);
        return;
      }
    }
  }

  void gru_cell_backward(const Node& n) {
    const std::uint32_t ix = arg(n, 0), ih = arg(n, 1);
    const std::uint32_t iWz = arg(n, 2), iUz = arg(n, 3), ibz = arg(n, 4);
    const std::uint32_t iWr = arg(n, 5), iUr = arg(n, 6), ibr = arg(n, 7);
    const std::uint32_t iWh = arg(n, 8), iUh = arg(n, 9), ibh = arg(n, 10);
    const Tensor& X = value(Var{ix});
    const Tensor& Hp = value(Var{ih});
    const std::size_t H = Hp.size(), I = X.size();
    const double* z = n.saved.data();
    const double* r = z + H;
    const double* c = r + H;
    const double* rh = c + H;
    const std::vector<double>& g = n.grad;

    std::vector<double> da_z(H), da_r(H), da_c(H), d_rh(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
      da_c[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
      da_z[i] = g[i] * (c[i] - Hp[i]) * z[i] * (1.0 - z[i]);
    }
    const Tensor& Uh = value(Var{iUh});
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < H; ++j) d_rh[j] += Uh.at(i, j) * da_c[i];
    for (std::size_t i = 0; i < H; ++i) da_r[i] = d_rh[i] * Hp[i] * r[i] * (1.0 - r[i]);

    auto outer = [&](std::uint32_t id, const std::vector<double>& left, std::span<const double> right) {
      if (!wants(id)) return;
      auto gw = grad_buffer(id);
      const std::size_t cols = right.size();
      for (std::size_t i = 0; i < left.size(); ++i) {
        const double li = left[i];
        if (li == 0.0) continue;
        double* row = gw.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += li * right[j];
      }
    };
    auto add_vec = [&](std::uint32_t id, const std::vector<double>& v) {
      if (!wants(id)) return;
      auto gb = grad_buffer(id);
      for (std::size_t i = 0; i < v.size(); ++i) gb[i] += v[i];
    };
    auto transposed_into = [&](std::span<double> dst, std::uint32_t id, const std::vector<double>& v) {
      const Tensor& M = value(Var{id});
      const std::size_t cols = M.cols();
      const double* mp = M.data().data();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const double* row = mp + i * cols;
        for (std::size_t j = 0; j < cols; ++j) dst[j] += row[j] * vi;
      }
    };

    const std::span<const double> xs = X.data();
    const std::span<const double> hs = Hp.data();
    outer(iWz, da_z, xs);
    outer(iUz, da_z, hs);
    add_vec(ibz, da_z);
    outer(iWr, da_r, xs);
    outer(iUr, da_r, hs);
    add_vec(ibr, da_r);
    outer(iWh, da_c, xs);
    outer(iUh, da_c, std::span<const double>(rh, H));
    add_vec(ibh, da_c);

    if (wants(ix)) {
      auto gx = grad_buffer(ix);
      transposed_into(gx, iWz, da_z);
      transposed_into(gx, iWr, da_r);
      transposed_into(gx, iWh, da_c);
    }
    if (wants(ih)) {
      auto gh = grad_buffer(ih);
      for (std::size_t i = 0; i < H; ++i) gh[i] += g[i] * (1.0 - z[i]) + d_rh[i] * r[i];
      transposed_into(gh, iUz, da_z);
      transposed_into(gh, iUr, da_r);
    }
    (void)I;
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> args_;
  std::vector<CustomBackward> customs_;
  std::unordered_map<Parameter*, std::uint32_t> param_nodes_;
  std::vector<Parameter*> lookup_tables_;
  bool consumed_ = false;
};

}  // namespace chargenet
