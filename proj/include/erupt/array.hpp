// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "erupt/errors.hpp"

namespace erupt {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

// Process-wide allocation accounting for dense buffers. `peak` is a
// high-water mark resettable by the bench harness; `budget` (0 = unlimited)
// turns oversized transient allocations into AllocBudgetError so the bench
// can report an OOM row instead of taking the process down.
struct AllocStats {
  static std::atomic<std::int64_t>& current() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& peak() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& budget() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }

  static void on_alloc(std::int64_t bytes) {
    std::int64_t b = budget().load(std::memory_order_relaxed);
    std::int64_t cur = current().load(std::memory_order_relaxed) + bytes;
    if (b > 0 && cur > b)
      throw AllocBudgetError("tensor allocation budget exceeded: " +
                             std::to_string(cur) + " > " + std::to_string(b) +
                             " bytes");
    cur = current().fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::int64_t p = peak().load(std::memory_order_relaxed);
    while (cur > p &&
           !peak().compare_exchange_weak(p, cur, std::memory_order_relaxed)) {
    }
  }
  static void on_free(std::int64_t bytes) {
    current().fetch_sub(bytes, std::memory_order_relaxed);
  }

  static void reset_peak() { peak().store(current().load()); }
  static void set_budget(std::int64_t bytes) { budget().store(bytes); }
};

namespace detail {
template <class T>
struct TrackedBuf {
  std::vector<T> v;
  explicit TrackedBuf(std::int64_t n) : v(checked(n)) {}
  ~TrackedBuf() {
    AllocStats::on_free(static_cast<std::int64_t>(v.size() * sizeof(T)));
  }
  static std::size_t checked(std::int64_t n) {
    AllocStats::on_alloc(n * static_cast<std::int64_t>(sizeof(T)));
    return static_cast<std::size_t>(n);
  }
};
}  // namespace detail

// Dense row-major n-d array. Storage is shared so parameter leaves can view
// the master copy without copying; values are treated as immutable once
// wrapped in a graph node (the optimizer mutates master storage between
// steps, never during a forward/backward pass).
template <class T>
class Array {
 public:
  Array() = default;

  explicit Array(Shape shape)
      : shape_(std::move(shape)),
        buf_(std::make_shared<detail::TrackedBuf<T>>(numel(shape_))) {}

  Array(Shape shape, T fill) : Array(std::move(shape)) {
    std::fill(data(), data() + size(), fill);
  }

  Array(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    if (numel(shape_) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("Array: " + std::to_string(values.size()) +
                       " values for shape " + shape_str(shape_));
    buf_ = std::make_shared<detail::TrackedBuf<T>>(0);
    AllocStats::on_alloc(static_cast<std::int64_t>(values.size() * sizeof(T)));
    buf_->v = std::move(values);
  }

  bool defined() const { return buf_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int rows() const { return dim(0); }
  int cols() const { return dim(1); }
  std::int64_t size() const {
    return buf_ ? static_cast<std::int64_t>(buf_->v.size()) : 0;
  }

  T* data() { return buf_->v.data(); }
  const T* data() const { return buf_->v.data(); }
  T& operator[](std::int64_t i) { return buf_->v[static_cast<size_t>(i)]; }
  T operator[](std::int64_t i) const { return buf_->v[static_cast<size_t>(i)]; }

  // Element access for 2-d arrays.
  T& at(int r, int c) { return buf_->v[static_cast<size_t>(r) * dim(1) + c]; }
  T at(int r, int c) const {
    return buf_->v[static_cast<size_t>(r) * dim(1) + c];
  }

  // Deep copy (fresh storage).
  Array clone() const {
    Array out(shape_);
    std::copy(data(), data() + size(), out.data());
    return out;
  }

  // Same storage, new shape.
  Array reshaped(Shape s) const {
    if (numel(s) != size())
      throw shape_mismatch("reshape", shape_, s);
    Array out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  bool same_storage(const Array& o) const { return buf_ == o.buf_; }

 private:
  Shape shape_;
  std::shared_ptr<detail::TrackedBuf<T>> buf_;
};

}  // namespace erupt
