// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "erupt/graph.hpp"
#include "erupt/rng.hpp"

namespace erupt {

template <class T>
struct GradCheckEntry {
  std::string name;
  T max_rel_err = T(0);
  std::size_t worst_index = 0;
  T analytic = T(0);
  T numeric = T(0);
  bool finite = true;
};

template <class T>
struct GradCheckReport {
  std::vector<GradCheckEntry<T>> entries;
  T max_rel_err = T(0);
  bool finite = true;

  bool ok(T tol) const { return finite && max_rel_err < tol; }

  std::string str() const {
    std::ostringstream os;
    for (const auto& e : entries) {
      os << e.name << ": max rel err " << e.max_rel_err;
      if (!e.finite) os << " (NON-FINITE)";
      os << " at [" << e.worst_index << "] analytic " << e.analytic
         << " fd " << e.numeric << "\n";
    }
    return os.str();
  }
};

// Compares reverse-mode gradients against central finite differences.
//
// f receives a graph and one tensor per named parameter and must return a
// scalar loss. samples_per_param limits how many coordinates of each
// parameter are probed (0 = all), drawn deterministically from seed.
template <class T, class F>
GradCheckReport<T> grad_check(F f,
                              std::vector<std::pair<std::string, Array<T>>>
                                  params,
                              T eps, std::size_t samples_per_param = 0,
                              std::uint64_t seed = 1) {
  GradCheckReport<T> report;

  // Analytic pass.
  std::vector<Array<T>> analytic;
  {
    Graph<T> g;
    std::vector<Tensor<T>> ts;
    ts.reserve(params.size());
    for (auto& [name, arr] : params) ts.push_back(g.leaf(arr));
    Tensor<T> loss = f(g, ts);
    if (!std::isfinite(static_cast<double>(loss.value().data()[0]))) {
      report.finite = false;
      GradCheckEntry<T> e;
      e.name = "<loss>";
      e.finite = false;
      report.entries.push_back(e);
      return report;
    }
    g.backward(loss);
    for (auto& t : ts) analytic.push_back(t.grad().clone());
  }

  auto eval = [&](const std::vector<std::pair<std::string, Array<T>>>& ps) {
    Graph<T> g;
    g.set_recording(false);
    std::vector<Tensor<T>> ts;
    ts.reserve(ps.size());
    for (auto& [name, arr] : ps) ts.push_back(g.leaf(arr));
    return f(g, ts).value().data()[0];
  };

  Rng rng(seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry<T> e;
    e.name = params[p].first;
    Array<T>& arr = params[p].second;
    const std::size_t n = arr.size();
    std::vector<std::size_t> idx;
    if (samples_per_param == 0 || samples_per_param >= n) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      for (std::size_t i = 0; i < samples_per_param; ++i)
        idx.push_back(rng.uniform_int(n));
    }
    for (std::size_t i : idx) {
      const T saved = arr.data()[i];
      arr.data()[i] = saved + eps;
      const T up = eval(params);
      arr.data()[i] = saved - eps;
      const T down = eval(params);
      arr.data()[i] = saved;
      const T fd = (up - down) / (T(2) * eps);
      const T an = analytic[p].data()[i];
      if (!std::isfinite(static_cast<double>(fd)) ||
          !std::isfinite(static_cast<double>(an))) {
        e.finite = false;
        report.finite = false;
        e.worst_index = i;
        e.analytic = an;
        e.numeric = fd;
        break;
      }
      const T denom = std::max({std::abs(an), std::abs(fd), T(1e-6)});
      const T rel = std::abs(an - fd) / denom;
      if (rel > e.max_rel_err) {
        e.max_rel_err = rel;
        e.worst_index = i;
        e.analytic = an;
        e.numeric = fd;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace erupt
