// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "erupt/array.hpp"
#include "erupt/errors.hpp"

namespace erupt {

inline constexpr int kLatentPoseDim = 8;
inline constexpr int kPoseFrequencies = 6;  // default F
inline constexpr int kPoseComponents = 12;  // position 3 + basis 9

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (n == 0) throw ValueError("normalized: zero-length vector");
  return a * (1.0 / n);
}

// Camera frame: basis rows (right, up, forward), unit length, right-handed
// with right x up = forward. Rows form the world-to-camera rotation.
struct CameraPose {
  Vec3 position;
  Vec3 right{1, 0, 0};
  Vec3 up{0, 1, 0};
  Vec3 forward{0, 0, 1};
};

// A pose expressed in some reference camera's frame; same representation.
using RelativePose = CameraPose;

inline void validate_pose(const CameraPose& p, double tol = 1e-6) {
  const double e[] = {std::abs(dot(p.right, p.right) - 1.0),
                      std::abs(dot(p.up, p.up) - 1.0),
                      std::abs(dot(p.forward, p.forward) - 1.0),
                      std::abs(dot(p.right, p.up)),
                      std::abs(dot(p.right, p.forward)),
                      std::abs(dot(p.up, p.forward)),
                      norm(cross(p.right, p.up) - p.forward)};
  for (double v : e)
    if (!(v < tol))
      throw ValueError("pose basis not orthonormal right-handed (err " +
                       std::to_string(v) + ")");
}

// World-space vector into the camera's coordinates (rotation only).
inline Vec3 to_camera(const CameraPose& cam, const Vec3& v) {
  return {dot(cam.right, v), dot(cam.up, v), dot(cam.forward, v)};
}

// Camera-space vector back to world coordinates (rotation only).
inline Vec3 to_world(const CameraPose& cam, const Vec3& v) {
  return cam.right * v.x + cam.up * v.y + cam.forward * v.z;
}

// Expresses `pose` in `reference`'s coordinate frame.
inline RelativePose relative_pose(const CameraPose& pose,
                                  const CameraPose& reference) {
  validate_pose(pose);
  validate_pose(reference);
  RelativePose r;
  r.position = to_camera(reference, pose.position - reference.position);
  r.right = to_camera(reference, pose.right);
  r.up = to_camera(reference, pose.up);
  r.forward = to_camera(reference, pose.forward);
  return r;
}

// Inverse of relative_pose: applies the reference's rigid transform.
inline CameraPose absolute_pose(const RelativePose& rel,
                                const CameraPose& reference) {
  CameraPose p;
  p.position = reference.position + to_world(reference, rel.position);
  p.right = to_world(reference, rel.right);
  p.up = to_world(reference, rel.up);
  p.forward = to_world(reference, rel.forward);
  return p;
}

inline CameraPose look_at(const Vec3& position, const Vec3& target,
                          const Vec3& world_up = {0, 1, 0}) {
  CameraPose p;
  p.position = position;
  p.forward = normalized(target - position);
  const Vec3 r = cross(world_up, p.forward);
  if (norm(r) < 1e-9)
    throw ValueError("look_at: view direction parallel to world up");
  p.right = normalized(r);
  p.up = cross(p.forward, p.right);
  return p;
}

// The 12 raw scalars of a pose, in encoding order.
inline std::vector<double> pose_components(const CameraPose& p) {
  return {p.position.x, p.position.y, p.position.z, p.right.x, p.right.y,
          p.right.z,    p.up.x,       p.up.y,       p.up.z,    p.forward.x,
          p.forward.y,  p.forward.z};
}

// Sine/cosine features of the scaled pose: for each of the 12 components c
// and each frequency k in 0..F-1, emits sin(2^k*c*scale), cos(2^k*c*scale).
// Length 2*F*12. `scale` is typically 1/scene-bounding-radius.
inline std::vector<double> sine_encode(const RelativePose& pose, int F,
                                       double scale) {
  if (F < 1) throw ValueError("sine_encode: F must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * F * kPoseComponents));
  for (double c : pose_components(pose)) {
    double arg = c * scale;
    for (int k = 0; k < F; ++k) {
      out.push_back(std::sin(arg));
      out.push_back(std::cos(arg));
      arg *= 2.0;
    }
  }
  return out;
}

inline int pose_encoding_dim(int F) { return 2 * F * kPoseComponents; }

// Fixed 2-D sine positional encoding over a gh x gw grid of cells, one row
// per cell in row-major order. d must be divisible by 4: a quarter of the
// channels each for sin/cos over x and y at geometric frequencies.
// Coordinates are cell centers in pixels ((i + 0.5) * cell).
template <class T>
Array<T> pos_encoding_2d(int gh, int gw, int d, double cell = 1.0) {
  if (d % 4 != 0)
    throw ValueError("pos_encoding_2d: dim must be divisible by 4, got " +
                     std::to_string(d));
  const int q = d / 4;
  Array<T> out({gh * gw, d});
  for (int iy = 0; iy < gh; ++iy)
    for (int ix = 0; ix < gw; ++ix) {
      T* row = out.data() + (static_cast<std::size_t>(iy) * gw + ix) * d;
      const double px = (ix + 0.5) * cell;
      const double py = (iy + 0.5) * cell;
      for (int f = 0; f < q; ++f) {
        const double omega = std::pow(10000.0, -double(f) / q);
        row[2 * f] = static_cast<T>(std::sin(omega * px));
        row[2 * f + 1] = static_cast<T>(std::cos(omega * px));
        row[2 * q + 2 * f] = static_cast<T>(std::sin(omega * py));
        row[2 * q + 2 * f + 1] = static_cast<T>(std::cos(omega * py));
      }
    }
  return out;
}

inline int patch_query_count(int H, int W, int patch) {
  if (patch <= 0 || H % patch != 0 || W % patch != 0)
    throw ValueError("patch_ray_grid: patch " + std::to_string(patch) +
                     " does not divide " + std::to_string(H) + "x" +
                     std::to_string(W));
  return (H / patch) * (W / patch);
}

// Initial patch-ray query content: one d-dim row per patch, the 2-D sine
// positional encoding of the patch center.
template <class T>
Array<T> patch_ray_grid(int H, int W, int patch, int d) {
  (void)patch_query_count(H, W, patch);
  return pos_encoding_2d<T>(H / patch, W / patch, d,
                            static_cast<double>(patch));
}

}  // namespace erupt
