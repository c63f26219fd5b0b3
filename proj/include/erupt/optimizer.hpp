// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "erupt/nn.hpp"

namespace erupt {

// Linear warmup to the peak rate, then cosine decay to zero over the
// remaining steps. `step` counts completed optimizer steps (0-based).
inline double lr_schedule(std::int64_t step, std::int64_t total_steps,
                          std::int64_t warmup_steps, double peak) {
  if (total_steps <= 0) throw ValueError("lr_schedule: total_steps must be > 0");
  if (warmup_steps < 0 || warmup_steps > total_steps)
    throw ValueError("lr_schedule: warmup outside [0, total]");
  if (step >= total_steps) return 0.0;
  if (step < warmup_steps)
    return peak * double(step + 1) / double(warmup_steps);
  if (total_steps == warmup_steps) return peak;
  const double progress =
      double(step - warmup_steps) / double(total_steps - warmup_steps);
  return 0.5 * peak * (1.0 + std::cos(M_PI * progress));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled; applied to every parameter
};

template <class T>
class AdamW {
 public:
  AdamW(ParamStore<T>& ps, AdamWConfig cfg = {}) : ps_(&ps), cfg_(cfg) {
    for (const auto& [name, e] : ps.entries()) {
      m_.emplace(name, Array<T>(e.value.shape(), T(0)));
      v_.emplace(name, Array<T>(e.value.shape(), T(0)));
    }
  }

  // One update from the gradients currently held in the parameter store.
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (auto& [name, e] : ps_->entries()) {
      T* p = e.value.data();
      const T* g = e.grad.data();
      T* m = m_.at(name).data();
      T* v = v_.at(name).data();
      const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
      for (std::int64_t i = 0; i < e.value.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const double mh = double(m[i]) / bc1;
        const double vh = double(v[i]) / bc2;
        p[i] = static_cast<T>(
            double(p[i]) - lr * (mh / (std::sqrt(vh) + cfg_.eps) +
                                 cfg_.weight_decay * double(p[i])));
      }
    }
  }

  std::int64_t t() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  // Moment access for checkpointing.
  std::vector<std::pair<std::string, Array<T>>> moments_m() const {
    return export_map(m_);
  }
  std::vector<std::pair<std::string, Array<T>>> moments_v() const {
    return export_map(v_);
  }
  void restore(const std::vector<std::pair<std::string, Array<T>>>& m,
               const std::vector<std::pair<std::string, Array<T>>>& v,
               std::int64_t t) {
    import_map(m, m_);
    import_map(v, v_);
    t_ = t;
  }

 private:
  static std::vector<std::pair<std::string, Array<T>>> export_map(
      const std::map<std::string, Array<T>>& src) {
    std::vector<std::pair<std::string, Array<T>>> out;
    out.reserve(src.size());
    for (const auto& [name, a] : src) out.emplace_back(name, a.clone());
    return out;
  }

  void import_map(const std::vector<std::pair<std::string, Array<T>>>& src,
                  std::map<std::string, Array<T>>& dst) {
    for (const auto& [name, a] : src) {
      auto it = dst.find(name);
      if (it == dst.end())
        throw ValueError("optimizer restore: unknown moment tensor " + name);
      if (it->second.shape() != a.shape())
        throw ShapeError("optimizer restore: shape mismatch for " + name);
      std::copy(a.data(), a.data() + a.size(), it->second.data());
    }
  }

  ParamStore<T>* ps_;
  AdamWConfig cfg_;
  std::map<std::string, Array<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace erupt
