// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "erupt/geometry.hpp"
#include "erupt/image.hpp"

namespace erupt {

// Viewing direction for (yaw, pitch) in radians: yaw 0 faces +z, positive
// yaw turns toward +x, positive pitch lifts toward +y.
inline Vec3 yaw_pitch_dir(double yaw, double pitch) {
  const double cp = std::cos(pitch);
  return {std::sin(yaw) * cp, std::sin(pitch), std::cos(yaw) * cp};
}

// Longitude/latitude of a unit direction; lon = atan2(x, z) so that the
// panorama's horizontal center (lon 0) faces +z.
inline void dir_to_lonlat(const Vec3& d, double& lon, double& lat) {
  lon = std::atan2(d.x, d.z);
  lat = std::asin(std::clamp(d.y, -1.0, 1.0));
}

inline Vec3 lonlat_to_dir(double lon, double lat) {
  const double cl = std::cos(lat);
  return {std::sin(lon) * cl, std::sin(lat), std::cos(lon) * cl};
}

// Continuous panorama pixel coordinates of a direction; pixel (r,c) covers
// [c, c+1) x [r, r+1) with its center at (c+0.5, r+0.5).
inline void dir_to_equirect(const Vec3& d, int pano_w, int pano_h, double& u,
                            double& v) {
  double lon, lat;
  dir_to_lonlat(d, lon, lat);
  u = (lon / (2.0 * M_PI) + 0.5) * pano_w;
  v = (0.5 - lat / M_PI) * pano_h;
}

// Bilinear sample with horizontal wraparound and vertical clamp.
inline void sample_equirect(const Image& pano, double u, double v,
                            float out[3]) {
  const int w = pano.w, h = pano.h;
  const double x = u - 0.5, y = v - 0.5;
  const double xf = std::floor(x), yf = std::floor(y);
  const double fx = x - xf, fy = y - yf;
  const int x0 = ((static_cast<int>(xf) % w) + w) % w;
  const int x1 = (x0 + 1) % w;
  const int y0 = std::clamp(static_cast<int>(yf), 0, h - 1);
  const int y1 = std::clamp(y0 + 1, 0, h - 1);
  const float* p00 = pano.at(y0, x0);
  const float* p01 = pano.at(y0, x1);
  const float* p10 = pano.at(y1, x0);
  const float* p11 = pano.at(y1, x1);
  for (int c = 0; c < 3; ++c) {
    const double top = p00[c] * (1.0 - fx) + p01[c] * fx;
    const double bot = p10[c] * (1.0 - fx) + p11[c] * fx;
    out[c] = static_cast<float>(top * (1.0 - fy) + bot * fy);
  }
}

// Perspective view carved out of an equirectangular panorama through the
// tangent plane oriented by (yaw, pitch). Square output, pinhole model.
inline Image gnomonic_project(const Image& pano, double yaw, double pitch,
                              double fov_deg, int out_size) {
  if (pano.w != 2 * pano.h)
    throw ValueError("gnomonic_project: panorama must be 2:1, got " +
                     std::to_string(pano.w) + "x" + std::to_string(pano.h));
  if (!(fov_deg > 0.0 && fov_deg < 120.0))
    throw ValueError("gnomonic_project: fov " + std::to_string(fov_deg) +
                     " outside (0, 120)");
  if (out_size <= 0) throw ValueError("gnomonic_project: bad output size");

  const double fov = fov_deg * M_PI / 180.0;
  const double focal = (out_size / 2.0) / std::tan(fov / 2.0);
  const Vec3 fwd = yaw_pitch_dir(yaw, pitch);
  const Vec3 right = normalized(cross(Vec3{0, 1, 0}, fwd));
  const Vec3 up = cross(fwd, right);

  Image out(out_size, out_size);
  for (int i = 0; i < out_size; ++i) {
    const double py = (out_size / 2.0 - (i + 0.5)) / focal;  // y up
    for (int j = 0; j < out_size; ++j) {
      const double px = ((j + 0.5) - out_size / 2.0) / focal;
      const Vec3 dir = normalized(right * px + up * py + fwd);
      double u, v;
      dir_to_equirect(dir, pano.w, pano.h, u, v);
      sample_equirect(pano, u, v, out.at(i, j));
    }
  }
  return out;
}

// Direction through output pixel (i,j) for the given view; the test oracle
// uses this to validate round trips.
inline Vec3 gnomonic_pixel_dir(double yaw, double pitch, double fov_deg,
                               int out_size, double i, double j) {
  const double fov = fov_deg * M_PI / 180.0;
  const double focal = (out_size / 2.0) / std::tan(fov / 2.0);
  const Vec3 fwd = yaw_pitch_dir(yaw, pitch);
  const Vec3 right = normalized(cross(Vec3{0, 1, 0}, fwd));
  const Vec3 up = cross(fwd, right);
  const double py = (out_size / 2.0 - (i + 0.5)) / focal;
  const double px = ((j + 0.5) - out_size / 2.0) / focal;
  return normalized(right * px + up * py + fwd);
}

}  // namespace erupt
