#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "marl/errors.hpp"
#include "marl/tensor/param_store.hpp"

namespace marl::tensor {

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  constant,
  parameter,
  linear,
  tanh,
  relu,
  add,
  sub,
  mul,
  scale,
  concat_cols,
  matmul_nt,
  softmax_rows,
  log_softmax_rows,
  select_cols,
  sum_all,
  mean_row_blocks,
  interleave_rows,
  attention,
  reshape,
};

/// Reverse-mode tape over row-major matrices.
///
/// Every value is a rows x cols matrix; vectors are 1 x n. Node values live in
/// one arena that is reused across clear() calls, so a steady-state forward and
/// backward pass performs no heap allocation. Parameter nodes read from and
/// accumulate into the bound ParamStore directly.
template <class T>
class Tape {
 public:
  Tape() {
    nodes_.reserve(256);
    values_.reserve(1 << 14);
  }

  void clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    aux_.clear();
    ints_.clear();
  }

  bool empty() const { return nodes_.empty(); }
  std::size_t node_count() const { return nodes_.size(); }

  int rows(Var v) const { return node(v).rows; }
  int cols(Var v) const { return node(v).cols; }

  std::span<const T> value(Var v) const {
    const Node& n = node(v);
    return {val(v.id), static_cast<std::size_t>(n.rows) * n.cols};
  }

  T scalar(Var v) const {
    const Node& n = node(v);
    if (n.rows != 1 || n.cols != 1) throw ShapeError("scalar() on " + shape_str(v));
    return val(v.id)[0];
  }

  /// Gradient of the last backward() seed with respect to v (zero before any
  /// backward pass). Parameter gradients are read from the ParamStore.
  std::span<const T> grad(Var v) const {
    const Node& n = node(v);
    const std::size_t sz = static_cast<std::size_t>(n.rows) * n.cols;
    if (n.param_grad != nullptr) return {n.param_grad, sz};
    if (grads_.size() < values_.size()) throw UsageError("grad() requested before backward()");
    return {grads_.data() + n.off, sz};
  }

  // -- leaves ---------------------------------------------------------------

  Var constant(std::span<const T> data, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != data.size()) {
      throw ShapeError("constant(): " + std::to_string(data.size()) + " values for shape " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    const Var v = push(Op::constant, rows, cols, false);
    std::copy(data.begin(), data.end(), mval(v.id));
    return v;
  }

  Var constant(T x) { return constant(std::span<const T>(&x, 1), 1, 1); }

  /// Trainable binding: backward() accumulates into p.grad.
  Var parameter(Param<T>& p) {
    Node n;
    n.op = Op::parameter;
    n.rows = p.rows;
    n.cols = p.cols;
    n.param_value = p.value.data();
    n.param_grad = p.grad.data();
    n.needs_grad = true;
    nodes_.push_back(n);
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  /// Frozen binding: value is read, no gradient is recorded.
  Var parameter(const Param<T>& p) {
    Node n;
    n.op = Op::parameter;
    n.rows = p.rows;
    n.cols = p.cols;
    n.param_value = p.value.data();
    n.needs_grad = false;
    nodes_.push_back(n);
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  // -- operations -------------------------------------------------------------

  /// Y = X W^T + b with X [n, in], W [out, in], b [1, out] (b may be invalid).
  Var linear(Var x, Var w, Var b = Var{}) {
    const int n = rows(x), in = cols(x), out = rows(w);
    if (cols(w) != in) throw ShapeError("linear(): input " + shape_str(x) + " vs weight " + shape_str(w));
    if (b.valid() && (rows(b) != 1 || cols(b) != out)) {
      throw ShapeError("linear(): bias " + shape_str(b) + " vs weight " + shape_str(w));
    }
    const Var y = push(Op::linear, n, out, ng(x) || ng(w) || (b.valid() && ng(b)), x, w, b);
    const T* X = val(x.id);
    const T* W = val(w.id);
    const T* B = b.valid() ? val(b.id) : nullptr;
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) {
      const T* xi = X + static_cast<std::size_t>(i) * in;
      T* yi = Y + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) {
        const T* wo = W + static_cast<std::size_t>(o) * in;
        T acc = B ? B[o] : T(0);
        for (int k = 0; k < in; ++k) acc += xi[k] * wo[k];
        yi[o] = acc;
      }
    }
    return y;
  }

  Var tanh(Var x) {
    const Var y = push(Op::tanh, rows(x), cols(x), ng(x), x);
    const std::size_t sz = size_of(y);
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (std::size_t i = 0; i < sz; ++i) Y[i] = std::tanh(X[i]);
    return y;
  }

  Var relu(Var x) {
    const Var y = push(Op::relu, rows(x), cols(x), ng(x), x);
    const std::size_t sz = size_of(y);
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (std::size_t i = 0; i < sz; ++i) Y[i] = X[i] > T(0) ? X[i] : T(0);
    return y;
  }

  Var add(Var a, Var b) { return binary(Op::add, a, b); }
  Var sub(Var a, Var b) { return binary(Op::sub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::mul, a, b); }

  Var scale(Var x, T s) {
    const Var y = push(Op::scale, rows(x), cols(x), ng(x), x);
    nodes_[y.id].s0 = s;
    const std::size_t sz = size_of(y);
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (std::size_t i = 0; i < sz; ++i) Y[i] = s * X[i];
    return y;
  }

  /// [a | b] for a [n, p], b [n, q].
  Var concat_cols(Var a, Var b) {
    const int n = rows(a), p = cols(a), q = cols(b);
    if (rows(b) != n) throw ShapeError("concat_cols(): " + shape_str(a) + " vs " + shape_str(b));
    const Var y = push(Op::concat_cols, n, p + q, ng(a) || ng(b), a, b);
    const T* A = val(a.id);
    const T* B = val(b.id);
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) {
      std::copy(A + static_cast<std::size_t>(i) * p, A + static_cast<std::size_t>(i + 1) * p,
                Y + static_cast<std::size_t>(i) * (p + q));
      std::copy(B + static_cast<std::size_t>(i) * q, B + static_cast<std::size_t>(i + 1) * q,
                Y + static_cast<std::size_t>(i) * (p + q) + p);
    }
    return y;
  }

  /// C = A B^T for A [n, k], B [m, k].
  Var matmul_nt(Var a, Var b) {
    const int n = rows(a), k = cols(a), m = rows(b);
    if (cols(b) != k) throw ShapeError("matmul_nt(): " + shape_str(a) + " vs " + shape_str(b));
    const Var y = push(Op::matmul_nt, n, m, ng(a) || ng(b), a, b);
    const T* A = val(a.id);
    const T* B = val(b.id);
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        T acc = 0;
        for (int t = 0; t < k; ++t) acc += A[i * k + t] * B[j * k + t];
        Y[i * m + j] = acc;
      }
    }
    return y;
  }

  Var softmax_rows(Var x) {
    const Var y = push(Op::softmax_rows, rows(x), cols(x), ng(x), x);
    const int n = rows(x), c = cols(x);
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) softmax_row(X + i * c, Y + i * c, c);
    return y;
  }

  Var log_softmax_rows(Var x) {
    const Var y = push(Op::log_softmax_rows, rows(x), cols(x), ng(x), x);
    const int n = rows(x), c = cols(x);
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) {
      const T* xi = X + i * c;
      T mx = *std::max_element(xi, xi + c);
      T s = 0;
      for (int j = 0; j < c; ++j) s += std::exp(xi[j] - mx);
      const T lse = mx + std::log(s);
      for (int j = 0; j < c; ++j) Y[i * c + j] = xi[j] - lse;
    }
    return y;
  }

  /// y[i] = x[i, index[i]]; output [n, 1].
  Var select_cols(Var x, std::span<const int> index) {
    const int n = rows(x), c = cols(x);
    if (static_cast<int>(index.size()) != n) {
      throw ShapeError("select_cols(): " + std::to_string(index.size()) + " indices for " + shape_str(x));
    }
    for (int idx : index) {
      if (idx < 0 || idx >= c) throw DomainError("select_cols(): index " + std::to_string(idx) + " out of range for " + shape_str(x));
    }
    const Var y = push(Op::select_cols, n, 1, ng(x), x);
    nodes_[y.id].aux = ints_.size();
    ints_.insert(ints_.end(), index.begin(), index.end());
    const T* X = val(x.id);
    T* Y = mval(y.id);
    for (int i = 0; i < n; ++i) Y[i] = X[i * c + index[i]];
    return y;
  }

  Var sum_all(Var x) {
    const Var y = push(Op::sum_all, 1, 1, ng(x), x);
    const std::size_t sz = size_of(x);
    const T* X = val(x.id);
    T acc = 0;
    for (std::size_t i = 0; i < sz; ++i) acc += X[i];
    mval(y.id)[0] = acc;
    return y;
  }

  /// Mean over consecutive row blocks: X [B*H, d] -> [B, d].
  Var mean_row_blocks(Var x, int block) {
    const int n = rows(x), d = cols(x);
    if (block <= 0 || n % block != 0) {
      throw ShapeError("mean_row_blocks(): block " + std::to_string(block) + " does not divide " + shape_str(x));
    }
    const int nb = n / block;
    const Var y = push(Op::mean_row_blocks, nb, d, ng(x), x);
    nodes_[y.id].i0 = block;
    const T* X = val(x.id);
    T* Y = mval(y.id);
    const T inv = T(1) / static_cast<T>(block);
    for (int b = 0; b < nb; ++b) {
      for (int j = 0; j < d; ++j) {
        T acc = 0;
        for (int r = 0; r < block; ++r) acc += X[(b * block + r) * d + j];
        Y[b * d + j] = acc * inv;
      }
    }
    return y;
  }

  /// Interleaves k inputs of shape [n, d] into [n*k, d]; row i*k + s = inputs[s][i].
  Var interleave_rows(std::span<const Var> inputs) {
    if (inputs.empty()) throw ShapeError("interleave_rows(): no inputs");
    const int n = rows(inputs[0]), d = cols(inputs[0]);
    const int k = static_cast<int>(inputs.size());
    bool needs = false;
    for (Var v : inputs) {
      if (rows(v) != n || cols(v) != d) {
        throw ShapeError("interleave_rows(): " + shape_str(v) + " vs " + shape_str(inputs[0]));
      }
      needs = needs || ng(v);
    }
    const Var y = push(Op::interleave_rows, n * k, d, needs);
    nodes_[y.id].i0 = k;
    nodes_[y.id].aux = ints_.size();
    for (Var v : inputs) ints_.push_back(v.id);
    T* Y = mval(y.id);
    for (int s = 0; s < k; ++s) {
      const T* Z = val(inputs[s].id);
      for (int i = 0; i < n; ++i) std::copy(Z + i * d, Z + (i + 1) * d, Y + (i * k + s) * d);
    }
    return y;
  }

  /// Multi-head scaled dot-product attention core applied independently to
  /// each block of `block` consecutive rows. Q, K, V are [B*block, D]; head h
  /// uses columns [h*D/heads, (h+1)*D/heads). Output has the heads concatenated.
  Var attention(Var q, Var k, Var v, int block, int heads) {
    const int n = rows(q), d = cols(q);
    if (rows(k) != n || cols(k) != d || rows(v) != n || cols(v) != d) {
      throw ShapeError("attention(): q " + shape_str(q) + ", k " + shape_str(k) + ", v " + shape_str(v));
    }
    if (heads <= 0 || d % heads != 0) {
      throw ConfigError("attention(): model dim " + std::to_string(d) + " not divisible by " +
                        std::to_string(heads) + " heads");
    }
    if (block <= 0 || n % block != 0) {
      throw ShapeError("attention(): block " + std::to_string(block) + " does not divide " + shape_str(q));
    }
    const Var y = push(Op::attention, n, d, ng(q) || ng(k) || ng(v), q, k, v);
    Node& nd = nodes_[y.id];
    nd.i0 = block;
    nd.i1 = heads;
    nd.aux = aux_.size();
    const int nb = n / block, hd = d / heads;
    aux_.resize(aux_.size() + static_cast<std::size_t>(nb) * heads * block * block);
    const T sc = T(1) / std::sqrt(static_cast<T>(hd));
    const T* Q = val(q.id);
    const T* K = val(k.id);
    const T* V = val(v.id);
    T* Y = mval(y.id);
    T* P = aux_.data() + nodes_[y.id].aux;
    for (int b = 0; b < nb; ++b) {
      for (int h = 0; h < heads; ++h) {
        T* Pbh = P + (static_cast<std::size_t>(b) * heads + h) * block * block;
        for (int i = 0; i < block; ++i) {
          const T* qi = Q + (b * block + i) * d + h * hd;
          for (int j = 0; j < block; ++j) {
            const T* kj = K + (b * block + j) * d + h * hd;
            T acc = 0;
            for (int t = 0; t < hd; ++t) acc += qi[t] * kj[t];
            Pbh[i * block + j] = acc * sc;
          }
          softmax_row(Pbh + i * block, Pbh + i * block, block);
          T* yi = Y + (b * block + i) * d + h * hd;
          for (int t = 0; t < hd; ++t) yi[t] = 0;
          for (int j = 0; j < block; ++j) {
            const T pij = Pbh[i * block + j];
            const T* vj = V + (b * block + j) * d + h * hd;
            for (int t = 0; t < hd; ++t) yi[t] += pij * vj[t];
          }
        }
      }
    }
    return y;
  }

  /// Attention weights saved by an attention() node: [B][heads][block][block].
  std::span<const T> attention_weights(Var att) const {
    const Node& n = node(att);
    if (n.op != Op::attention) throw UsageError("attention_weights(): node is not an attention op");
    const std::size_t sz = static_cast<std::size_t>(n.rows / n.i0) * n.i1 * n.i0 * n.i0;
    return {aux_.data() + n.aux, sz};
  }

  Var reshape(Var x, int r, int c) {
    if (static_cast<std::size_t>(r) * c != size_of(x)) {
      throw ShapeError("reshape(): " + shape_str(x) + " to " + std::to_string(r) + "x" + std::to_string(c));
    }
    const Var y = push(Op::reshape, r, c, ng(x), x);
    const T* X = val(x.id);
    std::copy(X, X + size_of(x), mval(y.id));
    return y;
  }

  // -- reverse pass -----------------------------------------------------------

  /// Propagates d(seed * loss) to every node that requires a gradient.
  /// Parameter gradients accumulate into their ParamStore.
  void backward(Var loss, T seed = T(1)) {
    if (nodes_.empty() || !loss.valid()) throw UsageError("backward() without a recorded forward pass");
    const Node& ln = node(loss);
    if (ln.rows != 1 || ln.cols != 1) throw ShapeError("backward(): loss must be 1x1, got " + shape_str(loss));
    grads_.assign(values_.size(), T(0));
    mgrad(loss.id)[0] += seed;
    for (int id = loss.id; id >= 0; --id) {
      if (nodes_[id].needs_grad) propagate(id);
    }
  }

 private:
  struct Node {
    Op op = Op::constant;
    int rows = 0;
    int cols = 0;
    std::size_t off = 0;
    const T* param_value = nullptr;
    T* param_grad = nullptr;
    int a = -1;
    int b = -1;
    int c = -1;
    int i0 = 0;
    int i1 = 0;
    std::size_t aux = 0;
    T s0 = T(0);
    bool needs_grad = false;
  };

  const Node& node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw UsageError("invalid tape variable");
    return nodes_[v.id];
  }

  std::string shape_str(Var v) const {
    const Node& n = node(v);
    return std::to_string(n.rows) + "x" + std::to_string(n.cols);
  }

  bool ng(Var v) const { return node(v).needs_grad; }
  std::size_t size_of(Var v) const { return static_cast<std::size_t>(node(v).rows) * node(v).cols; }

  const T* val(int id) const {
    const Node& n = nodes_[id];
    return n.param_value != nullptr ? n.param_value : values_.data() + n.off;
  }
  T* mval(int id) { return values_.data() + nodes_[id].off; }

  // Gradient slot; parameter nodes return the store's buffer, and frozen
  // parameters have none.
  T* mgrad(int id) {
    Node& n = nodes_[id];
    if (n.op == Op::parameter) return n.param_grad;
    return grads_.data() + n.off;
  }

  Var push(Op op, int r, int c, bool needs, Var a = Var{}, Var b = Var{}, Var cc = Var{}) {
    Node n;
    n.op = op;
    n.rows = r;
    n.cols = c;
    n.off = values_.size();
    n.a = a.id;
    n.b = b.id;
    n.c = cc.id;
    n.needs_grad = needs;
    values_.resize(values_.size() + static_cast<std::size_t>(r) * c);
    nodes_.push_back(n);
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  Var binary(Op op, Var a, Var b) {
    if (rows(a) != rows(b) || cols(a) != cols(b)) {
      throw ShapeError("elementwise op: " + shape_str(a) + " vs " + shape_str(b));
    }
    const Var y = push(op, rows(a), cols(a), ng(a) || ng(b), a, b);
    const std::size_t sz = size_of(y);
    const T* A = val(a.id);
    const T* B = val(b.id);
    T* Y = mval(y.id);
    switch (op) {
      case Op::add:
        for (std::size_t i = 0; i < sz; ++i) Y[i] = A[i] + B[i];
        break;
      case Op::sub:
        for (std::size_t i = 0; i < sz; ++i) Y[i] = A[i] - B[i];
        break;
      default:
        for (std::size_t i = 0; i < sz; ++i) Y[i] = A[i] * B[i];
        break;
    }
    return y;
  }

  static void softmax_row(const T* x, T* y, int c) {
    T mx = *std::max_element(x, x + c);
    T s = 0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (int j = 0; j < c; ++j) y[j] /= s;
  }

  bool wants(int id) const { return id >= 0 && nodes_[id].needs_grad; }

  void propagate(int id) {
    const Node& n = nodes_[id];
    const std::size_t sz = static_cast<std::size_t>(n.rows) * n.cols;
    const T* gy = grads_.data() + n.off;
    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        return;
      case Op::linear: {
        const int rows = n.rows, out = n.cols, in = nodes_[n.b].cols;
        const T* X = val(n.a);
        const T* W = val(n.b);
        if (wants(n.b)) {
          T* gW = mgrad(n.b);
          for (int i = 0; i < rows; ++i) {
            const T* xi = X + static_cast<std::size_t>(i) * in;
            for (int o = 0; o < out; ++o) {
              const T g = gy[i * out + o];
              if (g == T(0)) continue;
              T* gwo = gW + static_cast<std::size_t>(o) * in;
              for (int k = 0; k < in; ++k) gwo[k] += g * xi[k];
            }
          }
        }
        if (wants(n.c)) {
          T* gb = mgrad(n.c);
          for (int i = 0; i < rows; ++i) {
            for (int o = 0; o < out; ++o) gb[o] += gy[i * out + o];
          }
        }
        if (wants(n.a)) {
          T* gX = mgrad(n.a);
          for (int i = 0; i < rows; ++i) {
            T* gxi = gX + static_cast<std::size_t>(i) * in;
            for (int o = 0; o < out; ++o) {
              const T g = gy[i * out + o];
              if (g == T(0)) continue;
              const T* wo = W + static_cast<std::size_t>(o) * in;
              for (int k = 0; k < in; ++k) gxi[k] += g * wo[k];
            }
          }
        }
        return;
      }
      case Op::tanh: {
        const T* Y = val(id);
        T* gx = mgrad(n.a);
        for (std::size_t i = 0; i < sz; ++i) gx[i] += gy[i] * (T(1) - Y[i] * Y[i]);
        return;
      }
      case Op::relu: {
        const T* X = val(n.a);
        T* gx = mgrad(n.a);
        for (std::size_t i = 0; i < sz; ++i) {
          if (X[i] > T(0)) gx[i] += gy[i];
        }
        return;
      }
      case Op::add:
      case Op::sub: {
        const T sign = n.op == Op::add ? T(1) : T(-1);
        if (wants(n.a)) {
          T* ga = mgrad(n.a);
          for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i];
        }
        if (wants(n.b)) {
          T* gb = mgrad(n.b);
          for (std::size_t i = 0; i < sz; ++i) gb[i] += sign * gy[i];
        }
        return;
      }
      case Op::mul: {
        const T* A = val(n.a);
        const T* B = val(n.b);
        if (wants(n.a)) {
          T* ga = mgrad(n.a);
          for (std::size_t i = 0; i < sz; ++i) ga[i] += gy[i] * B[i];
        }
        if (wants(n.b)) {
          T* gb = mgrad(n.b);
          for (std::size_t i = 0; i < sz; ++i) gb[i] += gy[i] * A[i];
        }
        return;
      }
      case Op::scale: {
        T* gx = mgrad(n.a);
        for (std::size_t i = 0; i < sz; ++i) gx[i] += n.s0 * gy[i];
        return;
      }
      case Op::concat_cols: {
        const int p = nodes_[n.a].cols, q = nodes_[n.b].cols;
        if (wants(n.a)) {
          T* ga = mgrad(n.a);
          for (int i = 0; i < n.rows; ++i) {
            for (int j = 0; j < p; ++j) ga[i * p + j] += gy[i * (p + q) + j];
          }
        }
        if (wants(n.b)) {
          T* gb = mgrad(n.b);
          for (int i = 0; i < n.rows; ++i) {
            for (int j = 0; j < q; ++j) gb[i * q + j] += gy[i * (p + q) + p + j];
          }
        }
        return;
      }
      case Op::matmul_nt: {
        const int rows = n.rows, m = n.cols, k = nodes_[n.a].cols;
        const T* A = val(n.a);
        const T* B = val(n.b);
        if (wants(n.a)) {
          T* ga = mgrad(n.a);
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < m; ++j) {
              for (int t = 0; t < k; ++t) ga[i * k + t] += gy[i * m + j] * B[j * k + t];
            }
          }
        }
        if (wants(n.b)) {
          T* gb = mgrad(n.b);
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < m; ++j) {
              for (int t = 0; t < k; ++t) gb[j * k + t] += gy[i * m + j] * A[i * k + t];
            }
          }
        }
        return;
      }
      case Op::softmax_rows: {
        const T* Y = val(id);
        T* gx = mgrad(n.a);
        for (int i = 0; i < n.rows; ++i) {
          T dot = 0;
          for (int j = 0; j < n.cols; ++j) dot += gy[i * n.cols + j] * Y[i * n.cols + j];
          for (int j = 0; j < n.cols; ++j) gx[i * n.cols + j] += Y[i * n.cols + j] * (gy[i * n.cols + j] - dot);
        }
        return;
      }
      case Op::log_softmax_rows: {
        const T* Y = val(id);
        T* gx = mgrad(n.a);
        for (int i = 0; i < n.rows; ++i) {
          T s = 0;
          for (int j = 0; j < n.cols; ++j) s += gy[i * n.cols + j];
          for (int j = 0; j < n.cols; ++j) gx[i * n.cols + j] += gy[i * n.cols + j] - std::exp(Y[i * n.cols + j]) * s;
        }
        return;
      }
      case Op::select_cols: {
        const int c = nodes_[n.a].cols;
        T* gx = mgrad(n.a);
        const int* idx = ints_.data() + n.aux;
        for (int i = 0; i < n.rows; ++i) gx[i * c + idx[i]] += gy[i];
        return;
      }
      case Op::sum_all: {
        const std::size_t in_sz = static_cast<std::size_t>(nodes_[n.a].rows) * nodes_[n.a].cols;
        T* gx = mgrad(n.a);
        for (std::size_t i = 0; i < in_sz; ++i) gx[i] += gy[0];
        return;
      }
      case Op::mean_row_blocks: {
        const int block = n.i0, d = n.cols;
        const T inv = T(1) / static_cast<T>(block);
        T* gx = mgrad(n.a);
        for (int b = 0; b < n.rows; ++b) {
          for (int r = 0; r < block; ++r) {
            for (int j = 0; j < d; ++j) gx[(b * block + r) * d + j] += gy[b * d + j] * inv;
          }
        }
        return;
      }
      case Op::interleave_rows: {
        const int k = n.i0, d = n.cols, rows = n.rows / k;
        for (int s = 0; s < k; ++s) {
          const int src = ints_[n.aux + s];
          if (!wants(src)) continue;
          T* gz = mgrad(src);
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < d; ++j) gz[i * d + j] += gy[(i * k + s) * d + j];
          }
        }
        return;
      }
      case Op::attention: {
        propagate_attention(n, gy);
        return;
      }
      case Op::reshape: {
        T* gx = mgrad(n.a);
        for (std::size_t i = 0; i < sz; ++i) gx[i] += gy[i];
        return;
      }
    }
  }

  void propagate_attention(const Node& n, const T* gy) {
    const int block = n.i0, heads = n.i1, d = n.cols, nb = n.rows / block, hd = d / heads;
    const T sc = T(1) / std::sqrt(static_cast<T>(hd));
    const T* Q = val(n.a);
    const T* K = val(n.b);
    const T* V = val(n.c);
    const T* P = aux_.data() + n.aux;
    T* gQ = wants(n.a) ? mgrad(n.a) : nullptr;
    T* gK = wants(n.b) ? mgrad(n.b) : nullptr;
    T* gV = wants(n.c) ? mgrad(n.c) : nullptr;
    std::vector<T>& gs = scratch_;
    gs.assign(static_cast<std::size_t>(block) * block, T(0));
    for (int b = 0; b < nb; ++b) {
      for (int h = 0; h < heads; ++h) {
        const T* Pbh = P + (static_cast<std::size_t>(b) * heads + h) * block * block;
        // dP[i][j] = <gO_i, V_j>, then softmax backward into score gradient.
        for (int i = 0; i < block; ++i) {
          const T* gi = gy + (b * block + i) * d + h * hd;
          T dot = 0;
          for (int j = 0; j < block; ++j) {
            const T* vj = V + (b * block + j) * d + h * hd;
            T acc = 0;
            for (int t = 0; t < hd; ++t) acc += gi[t] * vj[t];
            gs[i * block + j] = acc;
            dot += acc * Pbh[i * block + j];
          }
          for (int j = 0; j < block; ++j) gs[i * block + j] = Pbh[i * block + j] * (gs[i * block + j] - dot) * sc;
          if (gV != nullptr) {
            for (int j = 0; j < block; ++j) {
              T* gvj = gV + (b * block + j) * d + h * hd;
              const T pij = Pbh[i * block + j];
              for (int t = 0; t < hd; ++t) gvj[t] += pij * gi[t];
            }
          }
        }
        for (int i = 0; i < block; ++i) {
          const T* qi = Q + (b * block + i) * d + h * hd;
          for (int j = 0; j < block; ++j) {
            const T g = gs[i * block + j];
            const T* kj = K + (b * block + j) * d + h * hd;
            if (gQ != nullptr) {
              T* gqi = gQ + (b * block + i) * d + h * hd;
              for (int t = 0; t < hd; ++t) gqi[t] += g * kj[t];
            }
            if (gK != nullptr) {
              T* gkj = gK + (b * block + j) * d + h * hd;
              for (int t = 0; t < hd; ++t) gkj[t] += g * qi[t];
            }
          }
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<T> values_;
  std::vector<T> grads_;
  std::vector<T> aux_;
  std::vector<int> ints_;
  std::vector<T> scratch_;
};

}  // namespace marl::tensor
