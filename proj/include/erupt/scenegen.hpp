// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "erupt/dataset.hpp"
#include "erupt/geometry.hpp"
#include "erupt/rng.hpp"

namespace erupt {

// Procedural toy scenes: analytic primitives dropped on a checkered ground
// plane, rendered with a tiny ray tracer (flat shading, one directional
// light). Everything is fully determined by a seed.

enum class ToyShape { kSphere, kBox };

struct ToyObject {
  ToyShape shape = ToyShape::kSphere;
  Vec3 position;  // center; objects rest on the ground plane y=0
  Vec3 color;
  double size = 0.5;  // sphere radius / box half-extent
};

struct ToySceneConfig {
  int image_size = 48;
  int n_views = 10;
  int n_inputs = 5;
  int min_objects = 4;
  int max_objects = 8;
  double shell_r0 = 4.0;  // camera half-sphere shell radii
  double shell_r1 = 6.0;
  double bound = 3.0;  // ground footprint half-extent for object placement
  double fov_deg = 60.0;
};

struct ToySceneSpec {
  std::uint64_t seed = 0;
  std::vector<ToyObject> objects;
  Vec3 ground_color{0.45, 0.45, 0.42};
  Vec3 ground_color_alt{0.30, 0.30, 0.28};
  Vec3 light_dir{0.35, 1.0, 0.25};  // normalized at build time
  double bound = 3.0;
};

struct ToyHit {
  double t = std::numeric_limits<double>::infinity();
  int obj = -1;  // >=0 object index, kGroundId ground, -1 miss
};

inline constexpr int kToyGroundId = -2;

namespace detail {

inline bool hit_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r,
                       double& t) {
  const Vec3 oc = o - c;
  const double b = dot(oc, d);
  const double disc = b * b - (dot(oc, oc) - r * r);
  if (disc < 0) return false;
  const double s = std::sqrt(disc);
  double tt = -b - s;
  if (tt < 1e-6) tt = -b + s;
  if (tt < 1e-6) return false;
  t = tt;
  return true;
}

inline bool hit_box(const Vec3& o, const Vec3& d, const Vec3& c, double h,
                    double& t) {
  // Slab test against the axis-aligned cube [c-h, c+h]^3.
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x - c.x, o.y - c.y, o.z - c.z};
  const double ds[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ds[a]) < 1e-12) {
      if (std::abs(os[a]) > h) return false;
      continue;
    }
    double ta = (-h - os[a]) / ds[a];
    double tb = (h - os[a]) / ds[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (t1 < 1e-6) return false;
  t = t0 > 1e-6 ? t0 : t1;
  return true;
}

}  // namespace detail

// Nearest intersection along o + t*d (d unit length).
inline ToyHit toy_trace(const ToySceneSpec& spec, const Vec3& o,
                        const Vec3& d) {
  ToyHit best;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const ToyObject& ob = spec.objects[i];
    double t;
    const bool hit = ob.shape == ToyShape::kSphere
                         ? detail::hit_sphere(o, d, ob.position, ob.size, t)
                         : detail::hit_box(o, d, ob.position, ob.size, t);
    if (hit && t < best.t) {
      best.t = t;
      best.obj = static_cast<int>(i);
    }
  }
  if (d.y < -1e-9) {
    const double t = -o.y / d.y;
    if (t > 1e-6 && t < best.t) {
      best.t = t;
      best.obj = kToyGroundId;
    }
  }
  return best;
}

inline Vec3 toy_normal(const ToySceneSpec& spec, const ToyHit& hit,
                       const Vec3& p) {
  if (hit.obj == kToyGroundId) return {0, 1, 0};
  const ToyObject& ob = spec.objects[static_cast<std::size_t>(hit.obj)];
  if (ob.shape == ToyShape::kSphere)
    return normalized(p - ob.position);
  const Vec3 d = p - ob.position;
  const double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
  if (ax >= ay && ax >= az) return {d.x > 0 ? 1.0 : -1.0, 0, 0};
  if (ay >= ax && ay >= az) return {0, d.y > 0 ? 1.0 : -1.0, 0};
  return {0, 0, d.z > 0 ? 1.0 : -1.0};
}

inline Vec3 toy_shade(const ToySceneSpec& spec, const Vec3& o, const Vec3& d) {
  const ToyHit hit = toy_trace(spec, o, d);
  if (hit.obj == -1) {
    // Sky: vertical gradient.
    const double k = std::clamp(0.5 * (d.y + 1.0), 0.0, 1.0);
    return Vec3{0.82, 0.86, 0.95} * (1.0 - k) + Vec3{0.45, 0.58, 0.90} * k;
  }
  const Vec3 p = o + d * hit.t;
  Vec3 albedo;
  if (hit.obj == kToyGroundId) {
    const int par = (static_cast<int>(std::floor(p.x)) +
                     static_cast<int>(std::floor(p.z))) &
                    1;
    albedo = par ? spec.ground_color : spec.ground_color_alt;
  } else {
    albedo = spec.objects[static_cast<std::size_t>(hit.obj)].color;
  }
  const Vec3 n = toy_normal(spec, hit, p);
  const double diffuse = std::max(0.0, dot(n, spec.light_dir));
  const Vec3 c = albedo * (0.35 + 0.65 * diffuse);
  return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0),
          std::clamp(c.z, 0.0, 1.0)};
}

inline Image render_toy_view(const ToySceneSpec& spec, const CameraPose& cam,
                             int size, double fov_deg) {
  const double focal = (size / 2.0) / std::tan(fov_deg * M_PI / 360.0);
  Image im(size, size);
  for (int i = 0; i < size; ++i) {
    const double py = (size / 2.0 - (i + 0.5)) / focal;
    for (int j = 0; j < size; ++j) {
      const double px = ((j + 0.5) - size / 2.0) / focal;
      const Vec3 dir =
          normalized(to_world(cam, Vec3{px, py, 1.0}));
      const Vec3 c = toy_shade(spec, cam.position, dir);
      float* out = im.at(i, j);
      out[0] = static_cast<float>(c.x);
      out[1] = static_cast<float>(c.y);
      out[2] = static_cast<float>(c.z);
    }
  }
  return im;
}

inline ToySceneSpec make_toy_scene_spec(std::uint64_t seed,
                                        const ToySceneConfig& cfg) {
  ToySceneSpec spec;
  spec.seed = seed;
  spec.bound = cfg.bound;
  Rng rng(fold_seed(seed, {0x5ce11e}));
  const int n = cfg.min_objects +
                rng.uniform_int(cfg.max_objects - cfg.min_objects + 1);
  for (int i = 0; i < n; ++i) {
    ToyObject ob;
    ob.shape = rng.uniform_int(2) == 0 ? ToyShape::kSphere : ToyShape::kBox;
    ob.size = rng.uniform(0.35, 0.9);
    const double lim = cfg.bound - ob.size;
    ob.position = {rng.uniform(-lim, lim), ob.size, rng.uniform(-lim, lim)};
    ob.color = {rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95),
                rng.uniform(0.15, 0.95)};
    spec.objects.push_back(ob);
  }
  spec.ground_color = {rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6),
                       rng.uniform(0.3, 0.6)};
  spec.ground_color_alt = spec.ground_color * 0.65;
  spec.light_dir =
      normalized({rng.uniform(-0.5, 0.5), 1.0, rng.uniform(-0.5, 0.5)});
  return spec;
}

// Uniform position inside the upper half-sphere shell, aimed at the scene
// center with a little jitter.
inline CameraPose sample_toy_camera(Rng& rng, const ToySceneConfig& cfg,
                                    const Vec3& center) {
  Vec3 dir;
  do {
    dir = {rng.normal(), rng.normal(), rng.normal()};
    dir = dir * (1.0 / std::max(norm(dir), 1e-9));
    dir.y = std::abs(dir.y);
  } while (dir.y < 0.12);  // keep cameras meaningfully above ground
  const double r0 = cfg.shell_r0, r1 = cfg.shell_r1;
  const double r =
      std::cbrt(rng.uniform(r0 * r0 * r0, r1 * r1 * r1));  // volume-uniform
  const Vec3 pos = Vec3{center.x, 0, center.z} + dir * r;
  const Vec3 aim = center + Vec3{rng.normal(0, 0.15), rng.normal(0, 0.15),
                                 rng.normal(0, 0.15)};
  return look_at(pos, aim);
}

inline std::pair<ToySceneSpec, SceneSample> generate_toy_scene(
    std::uint64_t seed, const ToySceneConfig& cfg) {
  ToySceneSpec spec = make_toy_scene_spec(seed, cfg);
  Vec3 center{0, 0.5, 0};
  if (!spec.objects.empty()) {
    Vec3 c{0, 0, 0};
    for (const auto& ob : spec.objects) c = c + ob.position;
    center = c * (1.0 / spec.objects.size());
  }
  Rng cam_rng(fold_seed(seed, {0xca13a}));
  SceneSample sample;
  for (int k = 0; k < cfg.n_views; ++k) {
    View v;
    v.pose = sample_toy_camera(cam_rng, cfg, center);
    v.image = render_toy_view(spec, v.pose, cfg.image_size, cfg.fov_deg);
    if (k < cfg.n_inputs)
      sample.inputs.push_back(std::move(v));
    else
      sample.targets.push_back(std::move(v));
  }
  return {std::move(spec), std::move(sample)};
}

}  // namespace erupt
