// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "erupt/graph.hpp"
#include "erupt/rng.hpp"

namespace erupt {

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Owns every parameter's master value and gradient accumulator. Entries are
// kept in name order so optimizer traversal is deterministic; initialization
// is keyed by (store seed, name) so it does not depend on creation order.
template <class T>
class ParamStore {
 public:
  struct Entry {
    Array<T> value;
    Array<T> grad;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Array<T>& create_normal(const std::string& name, Shape shape, double stddev) {
    Entry& e = insert(name, shape);
    Rng rng(fold_seed(seed_, {0x1417, name_hash(name)}));
    for (std::int64_t i = 0; i < e.value.size(); ++i)
      e.value[i] = static_cast<T>(rng.normal(0.0, stddev));
    return e.value;
  }

  Array<T>& create_const(const std::string& name, Shape shape, T fill) {
    Entry& e = insert(name, shape);
    std::fill(e.value.data(), e.value.data() + e.value.size(), fill);
    return e.value;
  }

  Array<T>& create_from(const std::string& name, Array<T> values) {
    Entry& e = insert(name, values.shape());
    std::copy(values.data(), values.data() + values.size(), e.value.data());
    return e.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ValueError("parameter not found: " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ValueError("parameter not found: " + name);
    return it->second;
  }

  // Differentiable leaf sharing this store's value and gradient buffers.
  Tensor<T> use(Graph<T>& g, const std::string& name) {
    Entry& e = at(name);
    return g.param(e.value, e.grad);
  }

  // Value as a constant: no gradient ever flows (frozen weights).
  Tensor<T> use_frozen(Graph<T>& g, const std::string& name) {
    return g.constant(at(name).value);
  }

  void zero_grad() {
    for (auto& [name, e] : entries_)
      std::fill(e.grad.data(), e.grad.data() + e.grad.size(), T(0));
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::int64_t scalar_count(const std::string& prefix = "") const {
    std::int64_t n = 0;
    for (const auto& [name, e] : entries_)
      if (name.rfind(prefix, 0) == 0) n += e.value.size();
    return n;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  Entry& insert(const std::string& name, const Shape& shape) {
    if (entries_.count(name))
      throw ValueError("duplicate parameter: " + name);
    Entry e;
    e.value = Array<T>(shape);
    e.grad = Array<T>(shape, T(0));
    return entries_.emplace(name, std::move(e)).first->second;
  }

  std::map<std::string, Entry> entries_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// layers

template <class T>
struct Linear {
  ParamStore<T>* ps = nullptr;
  std::string w, b;
  bool frozen = false;

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& prefix, int in, int out,
         double init_std = 0.02, bool bias = true)
      : ps(&store), w(prefix + ".w"), b(bias ? prefix + ".b" : "") {
    store.create_normal(w, {in, out}, init_std);
    if (bias) store.create_const(b, {1, out}, T(0));
  }

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x) const {
    Tensor<T> wt = frozen ? ps->use_frozen(g, w) : ps->use(g, w);
    Tensor<T> y = matmul(x, wt);
    if (!b.empty())
      y = add_rowvec(y, frozen ? ps->use_frozen(g, b) : ps->use(g, b));
    return y;
  }
};

template <class T>
struct LayerNormLayer {
  ParamStore<T>* ps = nullptr;
  std::string gamma, beta;

  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& store, const std::string& prefix, int d)
      : ps(&store), gamma(prefix + ".g"), beta(prefix + ".b") {
    store.create_const(gamma, {1, d}, T(1));
    store.create_const(beta, {1, d}, T(0));
  }

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x) const {
    return add_rowvec(mul_rowvec(layer_norm(x), ps->use(g, gamma)),
                      ps->use(g, beta));
  }
};

// Contiguous row ranges (one per independent attention group, e.g. one per
// image): attention never mixes rows across ranges.
struct RowRanges {
  std::vector<std::pair<int, int>> r;  // [begin, end)
  static RowRanges whole(int n) { return {{{0, n}}}; }
};

template <class T>
struct MultiHeadAttention {
  int d = 0, heads = 0;
  Linear<T> wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& prefix, int dim,
                     int n_heads)
      : d(dim), heads(n_heads),
        wq(store, prefix + ".q", dim, dim),
        wk(store, prefix + ".k", dim, dim),
        wv(store, prefix + ".v", dim, dim),
        wo(store, prefix + ".o", dim, dim) {
    if (dim % n_heads != 0)
      throw ValueError("attention dim " + std::to_string(dim) +
                       " not divisible by heads " + std::to_string(n_heads));
  }

  // Queries grouped by `groups`; all groups share the same key/value rows.
  Tensor<T> operator()(Graph<T>& g, Tensor<T> q_in, Tensor<T> kv_in,
                       const RowRanges& groups) const {
    const int dh = d / heads;
    const T scale = T(1) / static_cast<T>(std::sqrt(double(dh)));
    Tensor<T> q = wq(g, q_in), k = wk(g, kv_in), v = wv(g, kv_in);
    std::vector<Tensor<T>> head_out;
    head_out.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
      Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
      Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
      if (groups.r.size() == 1) {
        Tensor<T> att =
            softmax(mul_scalar(matmul(qh, kh, false, true), scale));
        head_out.push_back(matmul(att, vh));
      } else {
        std::vector<Tensor<T>> parts;
        parts.reserve(groups.r.size());
        for (const auto& [b, e] : groups.r) {
          Tensor<T> qg = slice_rows(qh, b, e);
          Tensor<T> att =
              softmax(mul_scalar(matmul(qg, kh, false, true), scale));
          parts.push_back(matmul(att, vh));
        }
        head_out.push_back(concat(parts, 0));
      }
    }
    return wo(g, concat(head_out, 1));
  }
};

// Per-group self-attention: each row range attends only within itself.
template <class T>
struct GroupedSelfAttention {
  int d = 0, heads = 0;
  Linear<T> wq, wk, wv, wo;

  GroupedSelfAttention() = default;
  GroupedSelfAttention(ParamStore<T>& store, const std::string& prefix,
                       int dim, int n_heads)
      : d(dim), heads(n_heads),
        wq(store, prefix + ".q", dim, dim),
        wk(store, prefix + ".k", dim, dim),
        wv(store, prefix + ".v", dim, dim),
        wo(store, prefix + ".o", dim, dim) {
    if (dim % n_heads != 0)
      throw ValueError("attention dim not divisible by heads");
  }

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x,
                       const RowRanges& groups) const {
    const int dh = d / heads;
    const T scale = T(1) / static_cast<T>(std::sqrt(double(dh)));
    Tensor<T> q = wq(g, x), k = wk(g, x), v = wv(g, x);
    std::vector<Tensor<T>> head_out;
    head_out.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
      Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
      Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
      std::vector<Tensor<T>> parts;
      parts.reserve(groups.r.size());
      for (const auto& [b, e] : groups.r) {
        Tensor<T> qg = slice_rows(qh, b, e);
        Tensor<T> kg = slice_rows(kh, b, e);
        Tensor<T> vg = slice_rows(vh, b, e);
        Tensor<T> att =
            softmax(mul_scalar(matmul(qg, kg, false, true), scale));
        parts.push_back(matmul(att, vg));
      }
      head_out.push_back(groups.r.size() == 1 ? parts[0] : concat(parts, 0));
    }
    return wo(g, concat(head_out, 1));
  }
};

template <class T>
struct Mlp {
  Linear<T> fc1, fc2;

  Mlp() = default;
  Mlp(ParamStore<T>& store, const std::string& prefix, int d, int hidden)
      : fc1(store, prefix + ".fc1", d, hidden),
        fc2(store, prefix + ".fc2", hidden, d) {}

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x) const {
    return fc2(g, gelu(fc1(g, x)));
  }
};

// Pre-norm self-attention transformer block (used by the extractor).
template <class T>
struct TransformerBlock {
  LayerNormLayer<T> ln1, ln2;
  GroupedSelfAttention<T> attn;
  Mlp<T> mlp;

  TransformerBlock() = default;
  TransformerBlock(ParamStore<T>& store, const std::string& prefix, int d,
                   int heads, int mlp_hidden)
      : ln1(store, prefix + ".ln1", d),
        ln2(store, prefix + ".ln2", d),
        attn(store, prefix + ".sa", d, heads),
        mlp(store, prefix + ".mlp", d, mlp_hidden) {}

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x,
                       const RowRanges& groups) const {
    x = add(x, attn(g, ln1(g, x), groups));
    x = add(x, mlp(g, ln2(g, x)));
    return x;
  }
};

}  // namespace erupt
