// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#include "erupt/image.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#ifdef ERUPT_USE_LIBPNG
#include <png.h>
#endif

namespace erupt {

std::vector<std::uint8_t> quantize_rgb8(const Image& im) {
  std::vector<std::uint8_t> out(im.px.size());
  for (std::size_t i = 0; i < im.px.size(); ++i) {
    const float v = std::clamp(im.px[i], 0.0f, 1.0f);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

#ifdef ERUPT_USE_LIBPNG

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("load_png: cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_png: png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: decode error in " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<std::uint8_t> bytes(std::size_t(h) * w * 3);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    row_ptrs[y] = bytes.data() + std::size_t(y) * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image im(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < bytes.size(); ++i)
    im.px[i] = static_cast<float>(bytes[i]) / 255.0f;
  return im;
}

void save_png(const std::string& path, const Image& im) {
  if (im.h <= 0 || im.w <= 0)
    throw ValueError("save_png: empty image for " + path);
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("save_png: cannot open " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: png_create_info_struct failed");
  }
  std::vector<std::uint8_t> bytes = quantize_rgb8(im);
  std::vector<png_bytep> row_ptrs(im.h);
  for (int y = 0; y < im.h; ++y)
    row_ptrs[y] = bytes.data() + std::size_t(y) * im.w * 3;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: encode error for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, im.w, im.h, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

#else

Image load_png(const std::string& path) {
  throw IoError("load_png: built without libpng (" + path + ")");
}

void save_png(const std::string& path, const Image&) {
  throw IoError("save_png: built without libpng (" + path + ")");
}

#endif

}  // namespace erupt
