// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <bit>
#include <random>
#include <sstream>
#include <string>

namespace erupt {

// Derives independent, reproducible sub-seeds from a base seed and a list of
// stream ids (epoch, scene index, purpose tag, ...). All stochastic choices in
// the project are keyed this way so results do not depend on worker count or
// call order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fold_seed(std::uint64_t base,
                               std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t id : ids) s = splitmix64(s ^ (id + 0x9e3779b97f4a7c15ULL));
  return s;
}

// mt19937_64 with hand-rolled distributions. The standard engine is bit-exact
// across platforms; standard distributions are not, so we implement our own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Box-Muller, pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  std::string state() const {
    std::ostringstream os;
    os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' '
       << std::bit_cast<std::uint64_t>(spare_);
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    std::uint64_t bits = 0;
    is >> eng_ >> spare_flag >> bits;
    has_spare_ = spare_flag != 0;
    spare_ = std::bit_cast<double>(bits);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace erupt
