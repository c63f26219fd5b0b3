// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "erupt/array.hpp"
#include "erupt/blas.hpp"
#include "erupt/errors.hpp"

namespace erupt {

template <class T>
class Graph;

// One entry on the tape. Interior nodes carry a backward function that
// scatters the node's gradient into its inputs' gradients.
template <class T>
struct Node {
  Array<T> value;
  Array<T> grad;  // empty until backward reaches this node
  std::vector<Node*> inputs;
  std::function<void(Node&)> backward_fn;
  const char* op = "";
  bool needs_grad = false;
  bool reachable = false;  // scratch used by backward()
  int visits = 0;          // times backward_fn has run (test hook)
};

// Lightweight handle: a node plus the graph that owns it.
template <class T>
struct Tensor {
  Graph<T>* g = nullptr;
  Node<T>* n = nullptr;

  const Array<T>& value() const { return n->value; }
  const Array<T>& grad() const { return n->grad; }
  const Shape& shape() const { return n->value.shape(); }
  int rows() const { return n->value.rows(); }
  int cols() const { return n->value.cols(); }
  bool defined() const { return n != nullptr; }
};

// Define-by-run tape. Nodes are owned by the graph and freed together when
// the graph is destroyed; one graph per training step keeps peak memory
// proportional to a single scene.
template <class T>
class Graph {
 public:
  struct BackwardStats {
    std::size_t reachable = 0;
    std::size_t visited = 0;
  };

  // Leaf holding data; no gradient is ever produced for it.
  Tensor<T> constant(Array<T> v) {
    return push("const", std::move(v), {}, nullptr, false);
  }

  // Leaf whose gradient accumulates into an externally owned array. The
  // value and gradient arrays share storage with the caller (parameter
  // store), so repeated graphs accumulate into the same buffers.
  Tensor<T> param(Array<T> v, Array<T> g) {
    if (v.shape() != g.shape())
      throw ShapeError("param: value/grad shape mismatch " +
                       shape_str(v.shape()) + " vs " + shape_str(g.shape()));
    Tensor<T> t = push("param", std::move(v), {}, nullptr, recording_);
    t.n->grad = std::move(g);
    return t;
  }

  // Leaf that wants a gradient local to this graph (grad checks, probes).
  Tensor<T> leaf(Array<T> v) {
    return push("leaf", std::move(v), {}, nullptr, recording_);
  }

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }

  Tensor<T> push(const char* op, Array<T> value, std::vector<Node<T>*> inputs,
                 std::function<void(Node<T>&)> bw, bool force_needs_grad) {
    auto node = std::make_unique<Node<T>>();
    node->op = op;
    node->value = std::move(value);
    node->needs_grad = force_needs_grad;
    if (recording_ && !force_needs_grad)
      for (Node<T>* in : inputs)
        if (in->needs_grad) {
          node->needs_grad = true;
          break;
        }
    if (node->needs_grad) {
      node->inputs = std::move(inputs);
      node->backward_fn = std::move(bw);
    }
    Node<T>* raw = node.get();
    tape_.push_back(std::move(node));
    return Tensor<T>{this, raw};
  }

  Tensor<T> make(const char* op, Array<T> value, std::vector<Node<T>*> inputs,
                 std::function<void(Node<T>&)> bw) {
    return push(op, std::move(value), std::move(inputs), std::move(bw), false);
  }

  // Reverse pass from a scalar loss. Marks the subgraph that the loss
  // depends on, allocates gradients for it, then walks the tape backwards
  // calling each reachable node's backward function exactly once.
  void backward(const Tensor<T>& loss) {
    if (loss.n->value.size() != 1)
      throw ValueError("backward: loss must be a scalar, got shape " +
                       shape_str(loss.shape()));
    if (!loss.n->needs_grad)
      throw ValueError("backward: loss does not depend on any parameter");
    stats_ = {};
    for (auto& n : tape_) {
      n->reachable = false;
      n->visits = 0;
    }
    mark(loss.n);
    if (loss.n->grad.size() == 0) loss.n->grad = Array<T>(loss.shape());
    loss.n->grad.data()[0] += T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>* n = it->get();
      if (!n->reachable || !n->backward_fn) continue;
      n->backward_fn(*n);
      ++n->visits;
      ++stats_.visited;
    }
  }

  const BackwardStats& last_backward_stats() const { return stats_; }
  std::size_t size() const { return tape_.size(); }
  const std::vector<std::unique_ptr<Node<T>>>& nodes() const { return tape_; }

 private:
  void mark(Node<T>* root) {
    std::vector<Node<T>*> stack{root};
    while (!stack.empty()) {
      Node<T>* n = stack.back();
      stack.pop_back();
      if (n->reachable) continue;
      n->reachable = true;
      ++stats_.reachable;
      if (n->grad.size() == 0) n->grad = Array<T>(n->value.shape());
      for (Node<T>* in : n->inputs)
        if (in->needs_grad && !in->reachable) stack.push_back(in);
    }
  }

  std::vector<std::unique_ptr<Node<T>>> tape_;
  BackwardStats stats_;
  bool recording_ = true;
};

// Names of the public differentiable operations.
inline std::vector<std::string> op_set() {
  return {"matmul", "add",     "mul",  "softmax", "layer_norm", "gelu",
          "concat", "slice",   "reshape", "transpose", "mean",  "sum",
          "conv2d", "sine",    "cosine",  "l2_norm"};
}

namespace detail {

template <class T>
void check_same_graph(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  if (a.g != b.g) throw ValueError(std::string(op) + ": mixed graphs");
}

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw shape_mismatch(op, a.shape(), b.shape());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul

// C = op(A) * op(B) with optional operand transposes; op(A) is [m,k].
template <class T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b, bool ta = false, bool tb = false) {
  detail::check_same_graph(a, b, "matmul");
  const int m = ta ? a.cols() : a.rows();
  const int k = ta ? a.rows() : a.cols();
  const int k2 = tb ? b.cols() : b.rows();
  const int n = tb ? b.rows() : b.cols();
  if (k != k2) throw shape_mismatch("matmul", a.shape(), b.shape());
  Array<T> out({m, n});
  gemm<T>(ta, tb, m, n, k, T(1), a.value().data(), b.value().data(), T(0),
          out.data());
  Node<T>*an = a.n, *bn = b.n;
  return a.g->make(
      "matmul", std::move(out), {an, bn},
      [an, bn, ta, tb, m, n, k](Node<T>& o) {
        const T* dc = o.grad.data();
        if (an->needs_grad) {
          if (!ta)
            gemm<T>(false, !tb, m, k, n, T(1), dc, bn->value.data(), T(1),
                    an->grad.data());
          else
            gemm<T>(tb, true, k, m, n, T(1), bn->value.data(), dc, T(1),
                    an->grad.data());
        }
        if (bn->needs_grad) {
          if (!tb)
            gemm<T>(!ta, false, k, n, m, T(1), an->value.data(), dc, T(1),
                    bn->grad.data());
          else
            gemm<T>(true, ta, n, k, m, T(1), dc, an->value.data(), T(1),
                    bn->grad.data());
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise binary

template <class T, class F, class Bw>
Tensor<T> binary_elementwise(const char* name, Tensor<T> a, Tensor<T> b, F f,
                             Bw bw) {
  detail::check_same_graph(a, b, name);
  detail::check_same_shape(name, a, b);
  Array<T> out(a.shape());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* po = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  Node<T>*an = a.n, *bn = b.n;
  return a.g->make(name, std::move(out), {an, bn},
                   [an, bn, bw, n](Node<T>& o) {
                     const T* d = o.grad.data();
                     const T* pa = an->value.data();
                     const T* pb = bn->value.data();
                     const T* pc = o.value.data();
                     T* ga = an->needs_grad ? an->grad.data() : nullptr;
                     T* gb = bn->needs_grad ? bn->grad.data() : nullptr;
                     for (std::size_t i = 0; i < n; ++i)
                       bw(d[i], pa[i], pb[i], pc[i], ga ? ga + i : nullptr,
                          gb ? gb + i : nullptr);
                   });
}

template <class T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  return binary_elementwise<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T d, T, T, T, T* ga, T* gb) {
        if (ga) *ga += d;
        if (gb) *gb += d;
      });
}

template <class T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
  return binary_elementwise<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T d, T, T, T, T* ga, T* gb) {
        if (ga) *ga += d;
        if (gb) *gb -= d;
      });
}

template <class T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
  return binary_elementwise<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T d, T x, T y, T, T* ga, T* gb) {
        if (ga) *ga += d * y;
        if (gb) *gb += d * x;
      });
}

template <class T>
Tensor<T> div(Tensor<T> a, Tensor<T> b) {
  return binary_elementwise<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T d, T, T y, T c, T* ga, T* gb) {
        if (ga) *ga += d / y;
        if (gb) *gb -= d * c / y;
      });
}

// ---------------------------------------------------------------------------
// elementwise unary

template <class T, class F, class Bw>
Tensor<T> unary_elementwise(const char* name, Tensor<T> a, F f, Bw bw) {
  Array<T> out(a.shape());
  const T* pa = a.value().data();
  T* po = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  Node<T>* an = a.n;
  return a.g->make(name, std::move(out), {an}, [an, bw, n](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    const T* px = an->value.data();
    const T* py = o.value.data();
    T* g = an->grad.data();
    for (std::size_t i = 0; i < n; ++i) g[i] += d[i] * bw(px[i], py[i]);
  });
}

template <class T>
Tensor<T> add_scalar(Tensor<T> a, T s) {
  return unary_elementwise<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> mul_scalar(Tensor<T> a, T s) {
  return unary_elementwise<T>(
      "mul_scalar", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> sine(Tensor<T> a) {
  return unary_elementwise<T>(
      "sine", a, [](T x) { return std::sin(x); },
      [](T x, T) { return std::cos(x); });
}

template <class T>
Tensor<T> cosine(Tensor<T> a) {
  return unary_elementwise<T>(
      "cosine", a, [](T x) { return std::cos(x); },
      [](T x, T) { return -std::sin(x); });
}

template <class T>
Tensor<T> exp_op(Tensor<T> a) {
  return unary_elementwise<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log_op(Tensor<T> a) {
  return unary_elementwise<T>(
      "log", a, [](T x) { return std::log(x); },
      [](T x, T) { return T(1) / x; });
}

template <class T>
Tensor<T> sqrt_op(Tensor<T> a) {
  return unary_elementwise<T>(
      "sqrt", a, [](T x) { return std::sqrt(x); },
      [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> sigmoid(Tensor<T> a) {
  return unary_elementwise<T>(
      "sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

// Tanh-approximated gelu.
template <class T>
Tensor<T> gelu(Tensor<T> a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  return unary_elementwise<T>(
      "gelu", a,
      [](T x) {
        const T u = kC * (x + kA * x * x * x);
        return T(0.5) * x * (T(1) + std::tanh(u));
      },
      [](T x, T) {
        const T u = kC * (x + kA * x * x * x);
        const T t = std::tanh(u);
        const T du = kC * (T(1) + T(3) * kA * x * x);
        return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
      });
}

// ---------------------------------------------------------------------------
// row-vector broadcasts

template <class T>
Tensor<T> add_rowvec(Tensor<T> a, Tensor<T> v) {
  detail::check_same_graph(a, v, "add_rowvec");
  if (v.rows() != 1 || v.cols() != a.cols())
    throw shape_mismatch("add_rowvec", a.shape(), v.shape());
  const int r = a.rows(), c = a.cols();
  Array<T> out(a.shape());
  const T* pa = a.value().data();
  const T* pv = v.value().data();
  T* po = out.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) po[i * c + j] = pa[i * c + j] + pv[j];
  Node<T>*an = a.n, *vn = v.n;
  return a.g->make("add_rowvec", std::move(out), {an, vn},
                   [an, vn, r, c](Node<T>& o) {
                     const T* d = o.grad.data();
                     if (an->needs_grad) {
                       T* g = an->grad.data();
                       for (int i = 0; i < r * c; ++i) g[i] += d[i];
                     }
                     if (vn->needs_grad) {
                       T* g = vn->grad.data();
                       for (int i = 0; i < r; ++i)
                         for (int j = 0; j < c; ++j) g[j] += d[i * c + j];
                     }
                   });
}

template <class T>
Tensor<T> mul_rowvec(Tensor<T> a, Tensor<T> v) {
  detail::check_same_graph(a, v, "mul_rowvec");
  if (v.rows() != 1 || v.cols() != a.cols())
    throw shape_mismatch("mul_rowvec", a.shape(), v.shape());
  const int r = a.rows(), c = a.cols();
  Array<T> out(a.shape());
  const T* pa = a.value().data();
  const T* pv = v.value().data();
  T* po = out.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) po[i * c + j] = pa[i * c + j] * pv[j];
  Node<T>*an = a.n, *vn = v.n;
  return a.g->make(
      "mul_rowvec", std::move(out), {an, vn}, [an, vn, r, c](Node<T>& o) {
        const T* d = o.grad.data();
        const T* pa = an->value.data();
        const T* pv = vn->value.data();
        if (an->needs_grad) {
          T* g = an->grad.data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) g[i * c + j] += d[i * c + j] * pv[j];
        }
        if (vn->needs_grad) {
          T* g = vn->grad.data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) g[j] += d[i * c + j] * pa[i * c + j];
        }
      });
}

// ---------------------------------------------------------------------------
// row-wise normalizations

template <class T>
Tensor<T> softmax(Tensor<T> a) {
  const int r = a.rows(), c = a.cols();
  Array<T> out(a.shape());
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < r; ++i) {
    const T* x = px + std::size_t(i) * c;
    T* y = py + std::size_t(i) * c;
    T mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    T s = T(0);
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    const T inv = T(1) / s;
    for (int j = 0; j < c; ++j) y[j] *= inv;
  }
  Node<T>* an = a.n;
  return a.g->make("softmax", std::move(out), {an}, [an, r, c](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    const T* y = o.value.data();
    T* g = an->grad.data();
    for (int i = 0; i < r; ++i) {
      const std::size_t off = std::size_t(i) * c;
      T dot = T(0);
      for (int j = 0; j < c; ++j) dot += d[off + j] * y[off + j];
      for (int j = 0; j < c; ++j)
        g[off + j] += y[off + j] * (d[off + j] - dot);
    }
  });
}

// Pre-affine row-wise layer norm; any scale/shift is applied by the caller.
template <class T>
Tensor<T> layer_norm(Tensor<T> a, T eps = T(1e-5)) {
  const int r = a.rows(), c = a.cols();
  Array<T> out(a.shape());
  Array<T> inv_std({r, 1});
  const T* px = a.value().data();
  T* py = out.data();
  T* pinv = inv_std.data();
  for (int i = 0; i < r; ++i) {
    const T* x = px + std::size_t(i) * c;
    T* y = py + std::size_t(i) * c;
    T mu = T(0);
    for (int j = 0; j < c; ++j) mu += x[j];
    mu /= T(c);
    T var = T(0);
    for (int j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= T(c);
    const T inv = T(1) / std::sqrt(var + eps);
    pinv[i] = inv;
    for (int j = 0; j < c; ++j) y[j] = (x[j] - mu) * inv;
  }
  Node<T>* an = a.n;
  return a.g->make("layer_norm", std::move(out), {an},
                   [an, r, c, inv_std](Node<T>& o) {
                     if (!an->needs_grad) return;
                     const T* d = o.grad.data();
                     const T* y = o.value.data();
                     const T* pinv = inv_std.data();
                     T* g = an->grad.data();
                     for (int i = 0; i < r; ++i) {
                       const std::size_t off = std::size_t(i) * c;
                       T mean_d = T(0), mean_dy = T(0);
                       for (int j = 0; j < c; ++j) {
                         mean_d += d[off + j];
                         mean_dy += d[off + j] * y[off + j];
                       }
                       mean_d /= T(c);
                       mean_dy /= T(c);
                       for (int j = 0; j < c; ++j)
                         g[off + j] += pinv[i] * (d[off + j] - mean_d -
                                                  y[off + j] * mean_dy);
                     }
                   });
}

// Rows scaled to unit euclidean length (norms below eps are clamped).
template <class T>
Tensor<T> normalize_rows(Tensor<T> a, T eps = T(1e-12)) {
  const int r = a.rows(), c = a.cols();
  Array<T> out(a.shape());
  Array<T> inv_norm({r, 1});
  const T* px = a.value().data();
  T* py = out.data();
  T* pinv = inv_norm.data();
  for (int i = 0; i < r; ++i) {
    const T* x = px + std::size_t(i) * c;
    T s = T(0);
    for (int j = 0; j < c; ++j) s += x[j] * x[j];
    const T inv = T(1) / std::max(std::sqrt(s), eps);
    pinv[i] = inv;
    for (int j = 0; j < c; ++j) py[std::size_t(i) * c + j] = x[j] * inv;
  }
  Node<T>* an = a.n;
  return a.g->make("normalize_rows", std::move(out), {an},
                   [an, r, c, inv_norm](Node<T>& o) {
                     if (!an->needs_grad) return;
                     const T* d = o.grad.data();
                     const T* y = o.value.data();
                     const T* pinv = inv_norm.data();
                     T* g = an->grad.data();
                     for (int i = 0; i < r; ++i) {
                       const std::size_t off = std::size_t(i) * c;
                       T dot = T(0);
                       for (int j = 0; j < c; ++j) dot += d[off + j] * y[off + j];
                       for (int j = 0; j < c; ++j)
                         g[off + j] +=
                             pinv[i] * (d[off + j] - y[off + j] * dot);
                     }
                   });
}

// ---------------------------------------------------------------------------
// shape ops

template <class T>
Tensor<T> reshape(Tensor<T> a, Shape shape) {
  if (numel(shape) != static_cast<std::int64_t>(a.value().size()))
    throw shape_mismatch("reshape", a.shape(), shape);
  Array<T> out = a.value().reshaped(shape);  // shares storage
  Node<T>* an = a.n;
  return a.g->make("reshape", std::move(out), {an}, [an](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    T* g = an->grad.data();
    const std::size_t n = o.grad.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += d[i];
  });
}

template <class T>
Tensor<T> transpose(Tensor<T> a) {
  const int r = a.rows(), c = a.cols();
  Array<T> out({c, r});
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) py[std::size_t(j) * r + i] = px[std::size_t(i) * c + j];
  Node<T>* an = a.n;
  return a.g->make("transpose", std::move(out), {an}, [an, r, c](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    T* g = an->grad.data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        g[std::size_t(i) * c + j] += d[std::size_t(j) * r + i];
  });
}

template <class T>
Tensor<T> slice(Tensor<T> a, int r0, int r1, int c0, int c1) {
  const int r = a.rows(), c = a.cols();
  if (r0 < 0 || c0 < 0 || r1 > r || c1 > c || r0 >= r1 || c0 >= c1)
    throw ShapeError("slice: window [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ")x[" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") out of range for " +
                     shape_str(a.shape()));
  const int nr = r1 - r0, nc = c1 - c0;
  Array<T> out({nr, nc});
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j)
      py[std::size_t(i) * nc + j] = px[std::size_t(i + r0) * c + (j + c0)];
  Node<T>* an = a.n;
  return a.g->make("slice", std::move(out), {an},
                   [an, r0, c0, nr, nc, c](Node<T>& o) {
                     if (!an->needs_grad) return;
                     const T* d = o.grad.data();
                     T* g = an->grad.data();
                     for (int i = 0; i < nr; ++i)
                       for (int j = 0; j < nc; ++j)
                         g[std::size_t(i + r0) * c + (j + c0)] +=
                             d[std::size_t(i) * nc + j];
                   });
}

template <class T>
Tensor<T> slice_rows(Tensor<T> a, int r0, int r1) {
  return slice(a, r0, r1, 0, a.cols());
}

template <class T>
Tensor<T> slice_cols(Tensor<T> a, int c0, int c1) {
  return slice(a, 0, a.rows(), c0, c1);
}

// Concatenation of any number of operands along rows (axis 0) or columns
// (axis 1), as a single node.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat: no operands");
  if (axis != 0 && axis != 1) throw ValueError("concat: axis must be 0 or 1");
  Graph<T>* g = parts[0].g;
  int rows = parts[0].rows(), cols = parts[0].cols();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::check_same_graph(parts[0], parts[i], "concat");
    if (axis == 0) {
      if (parts[i].cols() != cols)
        throw shape_mismatch("concat", parts[0].shape(), parts[i].shape());
      rows += parts[i].rows();
    } else {
      if (parts[i].rows() != rows)
        throw shape_mismatch("concat", parts[0].shape(), parts[i].shape());
      cols += parts[i].cols();
    }
  }
  Array<T> out({rows, cols});
  std::vector<Node<T>*> ins;
  ins.reserve(parts.size());
  for (const auto& p : parts) ins.push_back(p.n);
  T* po = out.data();
  if (axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy_n(p.value().data(), p.value().size(), po + off);
      off += p.value().size();
    }
  } else {
    int coff = 0;
    for (const auto& p : parts) {
      const int pc = p.cols();
      const T* px = p.value().data();
      for (int i = 0; i < rows; ++i)
        std::copy_n(px + std::size_t(i) * pc, pc,
                    po + std::size_t(i) * cols + coff);
      coff += pc;
    }
  }
  auto ins_copy = ins;
  return g->make("concat", std::move(out), std::move(ins),
                 [parts_n = std::move(ins_copy), axis, rows, cols](Node<T>& o) {
                   const T* d = o.grad.data();
                   if (axis == 0) {
                     std::size_t off = 0;
                     for (Node<T>* p : parts_n) {
                       const std::size_t sz = p->value.size();
                       if (p->needs_grad) {
                         T* g = p->grad.data();
                         for (std::size_t i = 0; i < sz; ++i) g[i] += d[off + i];
                       }
                       off += sz;
                     }
                   } else {
                     int coff = 0;
                     for (Node<T>* p : parts_n) {
                       const int pc = p->value.cols();
                       if (p->needs_grad) {
                         T* g = p->grad.data();
                         for (int i = 0; i < rows; ++i)
                           for (int j = 0; j < pc; ++j)
                             g[std::size_t(i) * pc + j] +=
                                 d[std::size_t(i) * cols + coff + j];
                       }
                       coff += pc;
                     }
                   }
                 });
}

template <class T>
Tensor<T> concat(Tensor<T> a, Tensor<T> b, int axis) {
  return concat(std::vector<Tensor<T>>{a, b}, axis);
}

// ---------------------------------------------------------------------------
// reductions

template <class T>
Tensor<T> sum(Tensor<T> a) {
  T s = T(0);
  const T* px = a.value().data();
  const std::size_t n = a.value().size();
  for (std::size_t i = 0; i < n; ++i) s += px[i];
  Node<T>* an = a.n;
  return a.g->make("sum", Array<T>({1, 1}, s), {an}, [an, n](Node<T>& o) {
    if (!an->needs_grad) return;
    const T d = o.grad.data()[0];
    T* g = an->grad.data();
    for (std::size_t i = 0; i < n; ++i) g[i] += d;
  });
}

template <class T>
Tensor<T> mean(Tensor<T> a) {
  const std::size_t n = a.value().size();
  T s = T(0);
  const T* px = a.value().data();
  for (std::size_t i = 0; i < n; ++i) s += px[i];
  Node<T>* an = a.n;
  return a.g->make("mean", Array<T>({1, 1}, s / T(n)), {an},
                   [an, n](Node<T>& o) {
                     if (!an->needs_grad) return;
                     const T d = o.grad.data()[0] / T(n);
                     T* g = an->grad.data();
                     for (std::size_t i = 0; i < n; ++i) g[i] += d;
                   });
}

template <class T>
Tensor<T> row_sum(Tensor<T> a) {
  const int r = a.rows(), c = a.cols();
  Array<T> out({r, 1});
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < r; ++i) {
    T s = T(0);
    for (int j = 0; j < c; ++j) s += px[std::size_t(i) * c + j];
    py[i] = s;
  }
  Node<T>* an = a.n;
  return a.g->make("row_sum", std::move(out), {an}, [an, r, c](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    T* g = an->grad.data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) g[std::size_t(i) * c + j] += d[i];
  });
}

// Frobenius norm of the whole tensor, as a scalar.
template <class T>
Tensor<T> l2_norm(Tensor<T> a) {
  const T* px = a.value().data();
  const std::size_t n = a.value().size();
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += px[i] * px[i];
  const T norm = std::sqrt(s);
  Node<T>* an = a.n;
  return a.g->make("l2_norm", Array<T>({1, 1}, norm), {an},
                   [an, n](Node<T>& o) {
                     if (!an->needs_grad) return;
                     const T y = o.value.data()[0];
                     if (y == T(0)) return;
                     const T d = o.grad.data()[0] / y;
                     const T* px = an->value.data();
                     T* g = an->grad.data();
                     for (std::size_t i = 0; i < n; ++i) g[i] += d * px[i];
                   });
}

// Diagonal of a square matrix as a column vector.
template <class T>
Tensor<T> take_diag(Tensor<T> a) {
  const int r = a.rows(), c = a.cols();
  if (r != c) throw ShapeError("take_diag: matrix not square, " +
                               shape_str(a.shape()));
  Array<T> out({r, 1});
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < r; ++i) py[i] = px[std::size_t(i) * c + i];
  Node<T>* an = a.n;
  return a.g->make("take_diag", std::move(out), {an}, [an, r, c](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    T* g = an->grad.data();
    for (int i = 0; i < r; ++i) g[std::size_t(i) * c + i] += d[i];
  });
}

// Repeat a [1,c] row n times.
template <class T>
Tensor<T> tile_rows(Tensor<T> a, int n) {
  if (a.rows() != 1)
    throw ShapeError("tile_rows: expected a single row, got " +
                     shape_str(a.shape()));
  const int c = a.cols();
  Array<T> out({n, c});
  const T* px = a.value().data();
  T* py = out.data();
  for (int i = 0; i < n; ++i) std::copy_n(px, c, py + std::size_t(i) * c);
  Node<T>* an = a.n;
  return a.g->make("tile_rows", std::move(out), {an}, [an, n, c](Node<T>& o) {
    if (!an->needs_grad) return;
    const T* d = o.grad.data();
    T* g = an->grad.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) g[j] += d[std::size_t(i) * c + j];
  });
}

// ---------------------------------------------------------------------------
// convolution

namespace detail {

// x: [h*w, cin] feature map; cols: [h*w, k*k*cin] patches with zero padding.
template <class T>
void im2col(const T* x, int h, int w, int cin, int k, T* cols) {
  const int pad = k / 2;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      T* dst = cols + (std::size_t(y) * w + xx) * (std::size_t(k) * k * cin);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          const int sy = y + dy - pad, sx = xx + dx - pad;
          T* cell = dst + (std::size_t(dy) * k + dx) * cin;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            std::fill_n(cell, cin, T(0));
          } else {
            std::copy_n(x + (std::size_t(sy) * w + sx) * cin, cin, cell);
          }
        }
    }
}

template <class T>
void col2im_add(const T* cols, int h, int w, int cin, int k, T* gx) {
  const int pad = k / 2;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const T* src =
          cols + (std::size_t(y) * w + xx) * (std::size_t(k) * k * cin);
      for (int dy = 0; dy < k; ++dy)
        for (int dx = 0; dx < k; ++dx) {
          const int sy = y + dy - pad, sx = xx + dx - pad;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          const T* cell = src + (std::size_t(dy) * k + dx) * cin;
          T* dst = gx + (std::size_t(sy) * w + sx) * cin;
          for (int c = 0; c < cin; ++c) dst[c] += cell[c];
        }
    }
}

}  // namespace detail

// Stride-1 same-padding convolution over an [h*w, cin] map; kernel 3x3 or
// 1x1. Weights are [k*k*cin, cout]; bias, if any, is added by the caller.
template <class T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, int h, int width, int k) {
  detail::check_same_graph(x, w, "conv2d");
  if (k != 1 && k != 3) throw ValueError("conv2d: kernel must be 1 or 3");
  const int hw = h * width;
  if (x.rows() != hw)
    throw ShapeError("conv2d: map rows " + std::to_string(x.rows()) +
                     " do not match " + std::to_string(h) + "x" +
                     std::to_string(width));
  const int cin = x.cols();
  if (w.rows() != k * k * cin)
    throw shape_mismatch("conv2d", x.shape(), w.shape());
  const int cout = w.cols();
  Array<T> out({hw, cout});
  Node<T>*xn = x.n, *wn = w.n;
  if (k == 1) {
    gemm<T>(false, false, hw, cout, cin, T(1), x.value().data(),
            w.value().data(), T(0), out.data());
    return x.g->make(
        "conv2d", std::move(out), {xn, wn},
        [xn, wn, hw, cin, cout](Node<T>& o) {
          const T* d = o.grad.data();
          if (xn->needs_grad)
            gemm<T>(false, true, hw, cin, cout, T(1), d, wn->value.data(),
                    T(1), xn->grad.data());
          if (wn->needs_grad)
            gemm<T>(true, false, cin, cout, hw, T(1), xn->value.data(), d,
                    T(1), wn->grad.data());
        });
  }
  Array<T> cols({hw, k * k * cin});
  detail::im2col(x.value().data(), h, width, cin, k, cols.data());
  gemm<T>(false, false, hw, cout, k * k * cin, T(1), cols.data(),
          w.value().data(), T(0), out.data());
  return x.g->make(
      "conv2d", std::move(out), {xn, wn},
      [xn, wn, cols, h, width, cin, cout, k, hw](Node<T>& o) {
        const T* d = o.grad.data();
        if (wn->needs_grad)
          gemm<T>(true, false, k * k * cin, cout, hw, T(1), cols.data(), d,
                  T(1), wn->grad.data());
        if (xn->needs_grad) {
          Array<T> dcols({hw, k * k * cin});
          gemm<T>(false, true, hw, k * k * cin, cout, T(1), d,
                  wn->value.data(), T(0), dcols.data());
          detail::col2im_add(dcols.data(), h, width, cin, k,
                             xn->grad.data());
        }
      });
}

// Rearranges channel blocks (2x2, cout) into 2x spatial resolution:
// out[(2y+dy)*2w + (2x+dx), ch] = x[y*w + x, (dy*2+dx)*cout + ch].
template <class T>
Tensor<T> depth_to_space(Tensor<T> x, int h, int w) {
  if (x.rows() != h * w)
    throw ShapeError("depth_to_space: map rows " + std::to_string(x.rows()) +
                     " do not match " + std::to_string(h) + "x" +
                     std::to_string(w));
  if (x.cols() % 4 != 0)
    throw ShapeError("depth_to_space: channels not divisible by 4, " +
                     shape_str(x.shape()));
  const int cout = x.cols() / 4;
  Array<T> out({4 * h * w, cout});
  const T* px = x.value().data();
  T* py = out.data();
  const int w2 = 2 * w;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const T* src = px + (std::size_t(y) * w + xx) * (4 * cout) +
                         (dy * 2 + dx) * cout;
          T* dst =
              py + (std::size_t(2 * y + dy) * w2 + (2 * xx + dx)) * cout;
          std::copy_n(src, cout, dst);
        }
  Node<T>* xn = x.n;
  return x.g->make(
      "depth_to_space", std::move(out), {xn}, [xn, h, w, cout](Node<T>& o) {
        if (!xn->needs_grad) return;
        const T* d = o.grad.data();
        T* g = xn->grad.data();
        const int w2 = 2 * w;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const T* src =
                    d + (std::size_t(2 * y + dy) * w2 + (2 * xx + dx)) * cout;
                T* dst = g + (std::size_t(y) * w + xx) * (4 * cout) +
                         (dy * 2 + dx) * cout;
                for (int c = 0; c < cout; ++c) dst[c] += src[c];
              }
      });
}

// [h*w, c] image rows -> [(h/p)*(w/p), p*p*c] non-overlapping patch rows,
// pixels within a patch in row-major order. Inverse permutation as backward.
template <class T>
Tensor<T> patchify(Tensor<T> x, int h, int w, int p) {
  if (x.rows() != h * w)
    throw ShapeError("patchify: image rows " + std::to_string(x.rows()) +
                     " do not match " + std::to_string(h) + "x" +
                     std::to_string(w));
  if (p <= 0 || h % p != 0 || w % p != 0)
    throw ShapeError("patchify: " + std::to_string(h) + "x" +
                     std::to_string(w) + " not divisible by patch " +
                     std::to_string(p));
  const int c = x.cols(), gh = h / p, gw = w / p;
  Array<T> out({gh * gw, p * p * c});
  const T* px = x.value().data();
  T* py = out.data();
  for (int iy = 0; iy < gh; ++iy)
    for (int ix = 0; ix < gw; ++ix)
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx) {
          const T* src = px + (std::size_t(iy * p + dy) * w + ix * p + dx) * c;
          T* dst = py + (std::size_t(iy) * gw + ix) * (p * p * c) +
                   (dy * p + dx) * c;
          std::copy_n(src, c, dst);
        }
  Node<T>* xn = x.n;
  return x.g->make(
      "patchify", std::move(out), {xn}, [xn, w, p, c, gh, gw](Node<T>& o) {
        if (!xn->needs_grad) return;
        const T* d = o.grad.data();
        T* g = xn->grad.data();
        for (int iy = 0; iy < gh; ++iy)
          for (int ix = 0; ix < gw; ++ix)
            for (int dy = 0; dy < p; ++dy)
              for (int dx = 0; dx < p; ++dx) {
                const T* src = d + (std::size_t(iy) * gw + ix) * (p * p * c) +
                               (dy * p + dx) * c;
                T* dst =
                    g + (std::size_t(iy * p + dy) * w + ix * p + dx) * c;
                for (int k = 0; k < c; ++k) dst[k] += src[k];
              }
      });
}

// ---------------------------------------------------------------------------
// angular-margin transform

// cos(theta + margin) computed from cos(theta), elementwise. Where
// theta + margin would exceed pi the value saturates at -1 (zero gradient).
template <class T>
Tensor<T> arc_margin(Tensor<T> a, T margin) {
  const T cm = std::cos(margin), sm = std::sin(margin);
  return unary_elementwise<T>(
      "arc_margin", a,
      [cm, sm](T c) {
        if (c < -cm) return T(-1);
        const T s = std::sqrt(std::max(T(1) - c * c, T(0)));
        return c * cm - s * sm;
      },
      [cm, sm](T c, T) {
        if (c < -cm) return T(0);
        const T s = std::sqrt(std::max(T(1) - c * c, T(1e-12)));
        return cm + c / s * sm;
      });
}

}  // namespace erupt
