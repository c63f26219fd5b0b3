// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "erupt/array.hpp"
#include "erupt/errors.hpp"

namespace erupt {

// Image quality metrics over [rows, 3] float images with values in [0, 1].

template <class T>
double mse(const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape())
    throw shape_mismatch("mse", a.shape(), b.shape());
  if (a.size() == 0) throw ValueError("mse: empty image");
  double acc = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return acc / double(a.size());
}

// Peak signal-to-noise ratio for unit-range images, clamped at 99 dB so an
// exact match stays finite.
inline double psnr_from_mse(double m) {
  if (m < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / m);
}

template <class T>
double psnr(const Array<T>& a, const Array<T>& b) {
  return psnr_from_mse(mse(a, b));
}

namespace detail {

inline const std::vector<double>& ssim_window() {
  // 11-tap Gaussian, sigma 1.5, normalized to sum 1.
  static const std::vector<double> w = [] {
    std::vector<double> v(11);
    double s = 0;
    for (int i = 0; i < 11; ++i) {
      const double x = i - 5;
      v[size_t(i)] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
      s += v[size_t(i)];
    }
    for (double& x : v) x /= s;
    return v;
  }();
  return w;
}

}  // namespace detail

// Mean structural similarity with the standard 11x11 Gaussian window
// (sigma 1.5, k1 = 0.01, k2 = 0.03, unit dynamic range), averaged over the
// three channels and all fully-covered window positions.
template <class T>
double ssim(const Array<T>& a, const Array<T>& b, int h, int w) {
  if (a.shape() != b.shape())
    throw shape_mismatch("ssim", a.shape(), b.shape());
  if (a.rows() != h * w || a.cols() != 3)
    throw ShapeError("ssim: image shape " + shape_str(a.shape()) +
                     " does not match " + std::to_string(h) + "x" +
                     std::to_string(w));
  if (h < 11 || w < 11)
    throw ValueError("ssim: image smaller than the 11x11 window");
  const std::vector<double>& win = detail::ssim_window();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  auto px = [&](const Array<T>& im, int y, int x, int c) {
    return double(im[(std::int64_t(y) * w + x) * 3 + c]);
  };

  double acc = 0;
  std::int64_t count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + 11 <= h; ++y0) {
      for (int x0 = 0; x0 + 11 <= w; ++x0) {
        double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
        for (int dy = 0; dy < 11; ++dy)
          for (int dx = 0; dx < 11; ++dx) {
            const double g = win[size_t(dy)] * win[size_t(dx)];
            const double pa = px(a, y0 + dy, x0 + dx, c);
            const double pb = px(b, y0 + dy, x0 + dx, c);
            ma += g * pa;
            mb += g * pb;
            va += g * pa * pa;
            vb += g * pb * pb;
            cov += g * pa * pb;
          }
        va -= ma * ma;
        vb -= mb * mb;
        cov -= ma * mb;
        const double num = (2 * ma * mb + c1) * (2 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        acc += num / den;
        ++count;
      }
    }
  }
  return acc / double(count);
}

}  // namespace erupt
