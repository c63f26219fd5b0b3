// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "erupt/dataset.hpp"
#include "erupt/gnomonic.hpp"
#include "erupt/rng.hpp"

namespace erupt {

// Street-level panorama sequences and the dynamic scene sampler that carves
// perspective views out of them.

inline constexpr double kMsvsFovDeg = 60.0;
inline constexpr double kMinSpacing = 0.5;   // meters
inline constexpr double kMaxSpacing = 10.0;  // meters
inline constexpr int kMinSequenceLen = 6;
inline constexpr int kMsvsWindow = 5;  // capture locations per scene

struct PanoFrame {
  Image pano;     // equirectangular, width = 2*height
  Vec3 position;  // meters
  double heading = 0;  // travel direction bearing, radians (0 faces +z)
};

struct SequenceRecord {
  std::vector<PanoFrame> frames;
};

// Splits sequences wherever consecutive spacing leaves [0.5, 10] m and drops
// fragments shorter than 6 frames.
inline std::vector<SequenceRecord> filter_sequences(
    std::vector<SequenceRecord> records) {
  std::vector<SequenceRecord> out;
  for (auto& rec : records) {
    SequenceRecord frag;
    auto flush = [&] {
      if (static_cast<int>(frag.frames.size()) >= kMinSequenceLen)
        out.push_back(std::move(frag));
      frag = SequenceRecord{};
    };
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
      if (!frag.frames.empty()) {
        const double d =
            norm(rec.frames[i].position - frag.frames.back().position);
        if (d < kMinSpacing || d > kMaxSpacing) flush();
      }
      frag.frames.push_back(std::move(rec.frames[i]));
    }
    flush();
  }
  return out;
}

struct ViewAngles {
  double yaw = 0;
  double pitch = 0;
};

// View direction for one capture: yaw is normal around the bearing toward
// the shared reference point (sd 0.35 of the FoV); pitch is uniform within
// [offset, 10] degrees where the offset lifts views that look along the
// travel direction (hiding the capture vehicle) by up to 5 degrees.
inline ViewAngles sample_view_angles(Rng& rng, const Vec3& position,
                                     const Vec3& ref_point, double heading) {
  ViewAngles a;
  const Vec3 d = ref_point - position;
  const double bearing = std::atan2(d.x, d.z);
  const double sigma = 0.35 * kMsvsFovDeg * M_PI / 180.0;
  a.yaw = rng.normal(bearing, sigma);
  const double off_deg = 5.0 * std::abs(std::sin(a.yaw - heading));
  const double pitch_deg = rng.uniform(off_deg, 10.0);
  a.pitch = pitch_deg * M_PI / 180.0;
  return a;
}

inline CameraPose pose_from_angles(const Vec3& position, const ViewAngles& a) {
  CameraPose p;
  p.position = position;
  p.forward = yaw_pitch_dir(a.yaw, a.pitch);
  p.right = normalized(cross(Vec3{0, 1, 0}, p.forward));
  p.up = cross(p.forward, p.right);
  return p;
}

// Draws one scene: a window of 5 consecutive captures, 5 input + 5 target
// slots assigned to window locations with repetition (redrawn until at
// least 2 distinct input locations), a common reference point at 5-15 scene
// sizes away, and per-view gnomonic projections at exactly 60 degree FoV.
inline SceneSample sample_msvs_scene(const SequenceRecord& seq, Rng& rng,
                                     int out_size) {
  const int len = static_cast<int>(seq.frames.size());
  if (len < kMsvsWindow)
    throw ValueError("sample_msvs_scene: sequence length " +
                     std::to_string(len) + " < " +
                     std::to_string(kMsvsWindow));
  const int start = rng.uniform_int(len - kMsvsWindow + 1);

  int slots[2 * kMsvsWindow];
  for (int attempt = 0;; ++attempt) {
    for (int& s : slots) s = rng.uniform_int(kMsvsWindow);
    int distinct = 0;
    for (int w = 0; w < kMsvsWindow; ++w) {
      bool used = false;
      for (int s = 0; s < kMsvsWindow; ++s) used |= (slots[s] == w);
      distinct += used ? 1 : 0;
    }
    if (distinct >= 2) break;
    if (attempt > 1000)
      throw ValueError("sample_msvs_scene: cannot draw distinct inputs");
  }

  Vec3 centroid{0, 0, 0};
  for (int w = 0; w < kMsvsWindow; ++w)
    centroid = centroid + seq.frames[start + w].position;
  centroid = centroid * (1.0 / kMsvsWindow);
  double scene_size = 0;
  for (int a = 0; a < kMsvsWindow; ++a)
    for (int b = a + 1; b < kMsvsWindow; ++b)
      scene_size = std::max(scene_size,
                            norm(seq.frames[start + a].position -
                                 seq.frames[start + b].position));
  scene_size = std::max(scene_size, 1e-6);

  const double bearing = rng.uniform(0, 2 * M_PI);
  const double dist = rng.uniform(5.0, 15.0) * scene_size;
  const Vec3 ref_point =
      centroid + Vec3{std::sin(bearing), 0, std::cos(bearing)} * dist;

  SceneSample sample;
  for (int s = 0; s < 2 * kMsvsWindow; ++s) {
    const PanoFrame& frame = seq.frames[start + slots[s]];
    const ViewAngles a =
        sample_view_angles(rng, frame.position, ref_point, frame.heading);
    View v;
    v.pose = pose_from_angles(frame.position, a);
    v.image = gnomonic_project(frame.pano, a.yaw, a.pitch, kMsvsFovDeg,
                               out_size);
    if (s < kMsvsWindow)
      sample.inputs.push_back(std::move(v));
    else
      sample.targets.push_back(std::move(v));
  }
  return sample;
}

// --- procedural fixtures ----------------------------------------------------

// Synthetic street panorama: sky with a sun disc, a skyline of colored
// facade bands, and a ground band. Seeded and fully deterministic.
inline Image make_panorama_fixture(std::uint64_t seed, int height) {
  const int h = height, w = 2 * height;
  Image im(h, w);
  Rng rng(fold_seed(seed, {0x9a40}));
  const double sun_lon = rng.uniform(-M_PI, M_PI);
  const double sun_lat = rng.uniform(0.3, 1.0);
  const int bands = 10 + rng.uniform_int(6);
  std::vector<Vec3> band_color(bands);
  std::vector<double> band_top(bands);
  for (int b = 0; b < bands; ++b) {
    Rng br(fold_seed(seed, {0xba4d, static_cast<std::uint64_t>(b)}));
    band_color[b] = {br.uniform(0.1, 0.9), br.uniform(0.1, 0.9),
                     br.uniform(0.1, 0.9)};
    band_top[b] = br.uniform(0.05, 0.45);  // facade top latitude (rad)
  }
  for (int y = 0; y < h; ++y) {
    const double lat = (0.5 - (y + 0.5) / h) * M_PI;
    for (int x = 0; x < w; ++x) {
      const double lon = ((x + 0.5) / w - 0.5) * 2 * M_PI;
      const int b = std::min(bands - 1,
                             static_cast<int>((lon + M_PI) / (2 * M_PI) *
                                              bands));
      Vec3 c;
      if (lat > band_top[b]) {
        const double k = std::clamp(lat / (M_PI / 2), 0.0, 1.0);
        c = Vec3{0.75, 0.82, 0.95} * (1 - k) + Vec3{0.35, 0.5, 0.9} * k;
        const double ds = std::hypot(lon - sun_lon, lat - sun_lat);
        if (ds < 0.12) c = {1.0, 0.95, 0.7};
      } else if (lat > -0.15) {
        const double shade = 0.6 + 0.4 * std::cos(8.0 * lon + b);
        c = band_color[b] * shade;
      } else {
        const double k = std::clamp(-lat / (M_PI / 2), 0.0, 1.0);
        c = Vec3{0.35, 0.33, 0.3} * (1 - 0.5 * k);
      }
      float* px = im.at(y, x);
      px[0] = static_cast<float>(std::clamp(c.x, 0.0, 1.0));
      px[1] = static_cast<float>(std::clamp(c.y, 0.0, 1.0));
      px[2] = static_cast<float>(std::clamp(c.z, 0.0, 1.0));
    }
  }
  return im;
}

// A drive along a gently curving street with ~2 m capture spacing.
inline SequenceRecord make_sequence_fixture(std::uint64_t seed, int length,
                                            int pano_height) {
  SequenceRecord rec;
  Rng rng(fold_seed(seed, {0x5eb}));
  Vec3 pos{rng.uniform(-50, 50), 0, rng.uniform(-50, 50)};
  double heading = rng.uniform(-M_PI, M_PI);
  for (int i = 0; i < length; ++i) {
    PanoFrame f;
    f.pano = make_panorama_fixture(
        fold_seed(seed, {0xfa0, static_cast<std::uint64_t>(i)}), pano_height);
    f.position = pos;
    f.heading = heading;
    rec.frames.push_back(std::move(f));
    heading += rng.normal(0, 0.08);
    pos = pos + Vec3{std::sin(heading), 0, std::cos(heading)} *
                    rng.uniform(1.5, 3.0);
  }
  return rec;
}

// Fixture directory: sequences.json + PNG panoramas, the input format of
// the msvs generate path.
void write_msvs_fixtures(const std::string& dir, int n_sequences, int length,
                         std::uint64_t seed, int pano_height);
std::vector<SequenceRecord> load_msvs_fixtures(const std::string& dir);

}  // namespace erupt
