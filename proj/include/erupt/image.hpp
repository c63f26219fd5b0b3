// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "erupt/array.hpp"
#include "erupt/errors.hpp"

namespace erupt {

// Interleaved RGB float image, values in [0,1], rows top to bottom.
struct Image {
  int h = 0, w = 0;
  std::vector<float> px;  // h*w*3

  Image() = default;
  Image(int height, int width, float fill = 0.0f)
      : h(height), w(width),
        px(static_cast<std::size_t>(height) * width * 3, fill) {}

  float* at(int y, int x) { return px.data() + (std::size_t(y) * w + x) * 3; }
  const float* at(int y, int x) const {
    return px.data() + (std::size_t(y) * w + x) * 3;
  }
};

// Image as an [h*w, 3] tensor value.
template <class T>
Array<T> image_to_array(const Image& im) {
  Array<T> a({im.h * im.w, 3});
  for (std::size_t i = 0; i < im.px.size(); ++i)
    a.data()[i] = static_cast<T>(im.px[i]);
  return a;
}

template <class T>
Image array_to_image(const Array<T>& a, int h, int w) {
  if (a.rows() != h * w || a.cols() != 3)
    throw ShapeError("array_to_image: expected [" + std::to_string(h * w) +
                     ",3], got " + shape_str(a.shape()));
  Image im(h, w);
  for (std::size_t i = 0; i < im.px.size(); ++i)
    im.px[i] = std::clamp(static_cast<float>(a.data()[i]), 0.0f, 1.0f);
  return im;
}

// 8-bit RGB PNG files.
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& im);

// Exact byte content written for an image (quantized 8-bit); used by tests.
std::vector<std::uint8_t> quantize_rgb8(const Image& im);

}  // namespace erupt
