// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include "erupt/dataset.hpp"
#include "erupt/msvs.hpp"
#include "erupt/scenegen.hpp"

using namespace erupt;
namespace fs = std::filesystem;

namespace {

bool images_equal(const Image& a, const Image& b) {
  return a.h == b.h && a.w == b.w &&
         std::memcmp(a.px.data(), b.px.data(),
                     a.px.size() * sizeof(float)) == 0;
}

SequenceRecord positions_only(const std::vector<Vec3>& ps) {
  SequenceRecord rec;
  for (const Vec3& p : ps) {
    PanoFrame f;
    f.position = p;
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

std::string temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("erupt_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("toy scenes are bit-identical for the same seed") {
  ToySceneConfig cfg;
  cfg.image_size = 24;
  auto [spec_a, a] = generate_toy_scene(42, cfg);
  auto [spec_b, b] = generate_toy_scene(42, cfg);
  REQUIRE(a.inputs.size() == b.inputs.size());
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    CHECK(images_equal(a.inputs[i].image, b.inputs[i].image));
    CHECK(norm(a.inputs[i].pose.position - b.inputs[i].pose.position) == 0.0);
  }
  for (std::size_t i = 0; i < a.targets.size(); ++i)
    CHECK(images_equal(a.targets[i].image, b.targets[i].image));

  auto [spec_c, c] = generate_toy_scene(43, cfg);
  CHECK(!images_equal(a.inputs[0].image, c.inputs[0].image));
}

TEST_CASE("toy scene layout matches the 10-view 128px configuration") {
  ToySceneConfig cfg;
  cfg.image_size = 128;
  cfg.n_views = 10;
  cfg.n_inputs = 5;
  cfg.min_objects = 16;
  cfg.max_objects = 31;
  auto [spec, sample] = generate_toy_scene(7, cfg);
  CHECK(sample.inputs.size() == 5);
  CHECK(sample.targets.size() == 5);
  CHECK(sample.inputs[0].image.h == 128);
  CHECK(sample.inputs[0].image.w == 128);
  CHECK(spec.objects.size() >= 16);
  CHECK(spec.objects.size() <= 31);
  for (const auto& ob : spec.objects) {
    CHECK(std::abs(ob.position.x) <= cfg.bound);
    CHECK(std::abs(ob.position.z) <= cfg.bound);
  }
  for (const auto& v : sample.inputs) validate_pose(v.pose);
  validate_scene(sample);
}

TEST_CASE("camera shell sampling respects the configured radii") {
  ToySceneConfig cfg;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const CameraPose p = sample_toy_camera(rng, cfg, Vec3{0, 0.5, 0});
    const double r = norm(p.position - Vec3{0, 0, 0});
    CHECK(r >= cfg.shell_r0 - 1e-9);
    CHECK(r <= cfg.shell_r1 + 1e-9);
    CHECK(p.position.y > 0);
  }
}

TEST_CASE("sphere silhouette radius matches the pinhole closed form") {
  ToySceneSpec spec;
  ToyObject sphere;
  sphere.shape = ToyShape::kSphere;
  sphere.size = 1.0;
  sphere.position = {0, 1.5, 0};
  sphere.color = {1.0, 0.1, 0.1};
  spec.objects.push_back(sphere);

  ToySceneSpec empty = spec;
  empty.objects.clear();

  const int size = 129;
  const double fov = 60.0, dist = 5.0;
  const CameraPose cam = look_at({0, 1.5, -dist}, sphere.position);
  const Image with = render_toy_view(spec, cam, size, fov);
  const Image without = render_toy_view(empty, cam, size, fov);

  // Closed form: half-angle asin(R/D), pixel radius f*tan(alpha).
  const double focal = (size / 2.0) / std::tan(fov * M_PI / 360.0);
  const double expected = focal * std::tan(std::asin(1.0 / dist));

  const int mid = size / 2;
  int count = 0;
  for (int j = 0; j < size; ++j)
    if (std::memcmp(with.at(mid, j), without.at(mid, j), 3 * sizeof(float)))
      ++count;
  const double measured = count / 2.0;
  CHECK(std::abs(measured - expected) <= 1.0);

  // The disc is centered: symmetric extent around the middle column.
  int first = size, last = -1;
  for (int j = 0; j < size; ++j)
    if (std::memcmp(with.at(mid, j), without.at(mid, j), 3 * sizeof(float))) {
      first = std::min(first, j);
      last = std::max(last, j);
    }
  CHECK(std::abs((first + last) / 2.0 - mid) <= 1.0);
}

TEST_CASE("nearer object wins along every ray (analytic depth oracle)") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    ToySceneSpec spec;
    for (int i = 0; i < 2; ++i) {
      ToyObject ob;
      ob.shape = ToyShape::kSphere;
      ob.size = rng.uniform(0.5, 1.2);
      ob.position = {rng.uniform(-1.5, 1.5), rng.uniform(0.5, 2.5),
                     rng.uniform(-1.5, 1.5)};
      ob.color = {1, 1, 1};
      spec.objects.push_back(ob);
    }
    const Vec3 origin{rng.uniform(-1, 1), rng.uniform(1, 3), -6.0};
    for (int s = 0; s < 300; ++s) {
      const Vec3 dir = normalized(Vec3{rng.uniform(-0.4, 0.4),
                                       rng.uniform(-0.3, 0.3), 1.0});
      // Independent quadratic solve per sphere.
      double best_t = std::numeric_limits<double>::infinity();
      int best = -1;
      for (int i = 0; i < 2; ++i) {
        const Vec3 oc = origin - spec.objects[i].position;
        const double b = dot(oc, dir);
        const double c = dot(oc, oc) - spec.objects[i].size *
                                           spec.objects[i].size;
        const double disc = b * b - c;
        if (disc < 0) continue;
        double t = -b - std::sqrt(disc);
        if (t < 1e-6) t = -b + std::sqrt(disc);
        if (t > 1e-6 && t < best_t) {
          best_t = t;
          best = i;
        }
      }
      const ToyHit hit = toy_trace(spec, origin, dir);
      if (best == -1) {
        CHECK(hit.obj != 0);
        CHECK(hit.obj != 1);
      } else {
        CHECK(hit.obj == best);
        CHECK(hit.t == doctest::Approx(best_t).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sequence filtering splits and drops per the spacing rules") {
  auto spaced = [](int n, double step, double gap_at = -1, double gap = 0) {
    std::vector<Vec3> ps;
    double x = 0;
    for (int i = 0; i < n; ++i) {
      ps.push_back({x, 0, 0});
      x += (i + 1 == static_cast<int>(gap_at)) ? gap : step;
    }
    return ps;
  };

  // 8 frames spaced 2 m: kept whole.
  auto kept = filter_sequences({positions_only(spaced(8, 2.0))});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].frames.size() == 8);

  // 50 m gap before index 4: fragments of 4 and 4, both dropped.
  std::vector<Vec3> gap;
  for (int i = 0; i < 4; ++i) gap.push_back({i * 2.0, 0, 0});
  for (int i = 0; i < 4; ++i) gap.push_back({56.0 + i * 2.0, 0, 0});
  CHECK(filter_sequences({positions_only(gap)}).empty());

  // 6 frames spaced 0.4 m: below the minimum, dropped.
  CHECK(filter_sequences({positions_only(spaced(6, 0.4))}).empty());

  // 12 frames with a mid gap: 6-frame tail survives.
  std::vector<Vec3> tail;
  for (int i = 0; i < 6; ++i) tail.push_back({i * 2.0, 0, 0});
  for (int i = 0; i < 6; ++i) tail.push_back({100.0 + i * 2.0, 0, 0});
  auto split = filter_sequences({positions_only(tail)});
  REQUIRE(split.size() == 2);
  CHECK(split[0].frames.size() == 6);
  CHECK(split[1].frames.size() == 6);
}

TEST_CASE("sampled yaw offsets have the specified spread") {
  Rng rng(21);
  const Vec3 pos{0, 0, 0}, ref{0, 0, 100};
  double sum = 0, sum2 = 0;
  const int n = 10000;
  double min_pitch = 1e9, max_pitch = -1e9;
  for (int i = 0; i < n; ++i) {
    const ViewAngles a = sample_view_angles(rng, pos, ref, 1.0);
    const double off = a.yaw;  // bearing to ref is 0
    sum += off;
    sum2 += off * off;
    min_pitch = std::min(min_pitch, a.pitch);
    max_pitch = std::max(max_pitch, a.pitch);
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  const double expected = 0.35 * kMsvsFovDeg * M_PI / 180.0;  // 21 degrees
  CHECK(std::abs(sd - expected) / expected < 0.05);
  CHECK(std::abs(mean) < 3 * expected / std::sqrt(double(n)) * 1.5);
  CHECK(min_pitch >= 0.0);
  CHECK(max_pitch <= 10.0 * M_PI / 180.0 + 1e-12);
}

TEST_CASE("pitch lift follows the heading-relative yaw") {
  Rng rng(22);
  // Looking perpendicular to travel: offset ~5 degrees, pitch in [off, 10].
  const Vec3 pos{0, 0, 0};
  for (int i = 0; i < 500; ++i) {
    const Vec3 ref{100, 0, 0};  // bearing pi/2
    const ViewAngles a = sample_view_angles(rng, pos, ref, M_PI / 2 - M_PI / 2);
    const double off = 5.0 * std::abs(std::sin(a.yaw - 0.0)) * M_PI / 180.0;
    CHECK(a.pitch >= off - 1e-12);
    CHECK(a.pitch <= 10.0 * M_PI / 180.0 + 1e-12);
  }
}

TEST_CASE("msvs scenes reproduce bit-exactly and obey the contract") {
  const SequenceRecord seq = make_sequence_fixture(3, 8, 32);
  REQUIRE(seq.frames.size() == 8);
  for (const auto& f : seq.frames) {
    CHECK(f.pano.w == 2 * f.pano.h);
  }

  Rng rng_a(77), rng_b(77);
  const SceneSample a = sample_msvs_scene(seq, rng_a, 24);
  const SceneSample b = sample_msvs_scene(seq, rng_b, 24);
  CHECK(a.inputs.size() == 5);
  CHECK(a.targets.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(images_equal(a.inputs[i].image, b.inputs[i].image));
    CHECK(images_equal(a.targets[i].image, b.targets[i].image));
  }

  // At least two distinct input capture locations, many draws.
  Rng rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    const SceneSample s = sample_msvs_scene(seq, rng, 8);
    std::set<std::pair<double, double>> locs;
    for (const auto& v : s.inputs)
      locs.insert({v.pose.position.x, v.pose.position.z});
    CHECK(locs.size() >= 2);
    for (const auto& v : s.inputs) validate_pose(v.pose);
    for (const auto& v : s.targets) validate_pose(v.pose);
  }
}

TEST_CASE("emitted msvs views are exact 60-degree gnomonic projections") {
  const SequenceRecord seq = make_sequence_fixture(5, 7, 32);
  Rng rng(91);
  const SceneSample s = sample_msvs_scene(seq, rng, 24);
  for (const auto& v : s.inputs) {
    // Recover yaw/pitch from the stored pose and re-project.
    const double pitch = std::asin(std::clamp(v.pose.forward.y, -1.0, 1.0));
    const double yaw = std::atan2(v.pose.forward.x, v.pose.forward.z);
    // Find the frame at this position.
    const PanoFrame* frame = nullptr;
    for (const auto& f : seq.frames)
      if (norm(f.position - v.pose.position) < 1e-12) frame = &f;
    REQUIRE(frame != nullptr);
    const Image expect =
        gnomonic_project(frame->pano, yaw, pitch, 60.0, 24);
    CHECK(images_equal(v.image, expect));
    CHECK(pitch >= -1e-12);
    CHECK(pitch <= 10.0 * M_PI / 180.0 + 1e-12);
  }
}

TEST_CASE("short sequences are rejected by the sampler") {
  const SequenceRecord seq = make_sequence_fixture(4, 4, 16);
  Rng rng(1);
  CHECK_THROWS_AS(sample_msvs_scene(seq, rng, 16), ValueError);
}

TEST_CASE("png round trip preserves quantized pixels") {
  const std::string dir = temp_dir("png");
  Image im(9, 13);
  Rng rng(31);
  for (auto& v : im.px) v = static_cast<float>(rng.uniform());
  save_png(dir + "/t.png", im);
  const Image back = load_png(dir + "/t.png");
  REQUIRE(back.h == im.h);
  REQUIRE(back.w == im.w);
  const auto qa = quantize_rgb8(im), qb = quantize_rgb8(back);
  CHECK(qa == qb);
  for (std::size_t i = 0; i < im.px.size(); ++i)
    CHECK(std::abs(im.px[i] - back.px[i]) <= 0.5f / 255.0f + 1e-6f);
  fs::remove_all(dir);
}

TEST_CASE("scene save/load round trip") {
  const std::string dir = temp_dir("scene");
  ToySceneConfig cfg;
  cfg.image_size = 16;
  auto [spec, sample] = generate_toy_scene(5, cfg);
  sample.targets[1].posed = false;
  save_scene(dir, sample);

  CHECK(fs::exists(dir + "/input_0.png"));
  CHECK(fs::exists(dir + "/target_4.png"));
  CHECK(fs::exists(dir + "/poses.json"));

  const SceneSample back = load_scene(dir);
  REQUIRE(back.inputs.size() == sample.inputs.size());
  REQUIRE(back.targets.size() == sample.targets.size());
  CHECK(back.targets[1].posed == false);
  CHECK(back.targets[0].posed == true);
  for (std::size_t i = 0; i < sample.inputs.size(); ++i) {
    CHECK(norm(back.inputs[i].pose.position - sample.inputs[i].pose.position) <
          1e-12);
    CHECK(quantize_rgb8(back.inputs[i].image) ==
          quantize_rgb8(sample.inputs[i].image));
  }
  fs::remove_all(dir);
}

TEST_CASE("pose JSON round trip and parse errors") {
  Rng rng(41);
  CameraPose p = look_at({1, 2, 3}, {0, 0.5, 0});
  const CameraPose back = pose_from_json_text(pose_to_json(p));
  CHECK(norm(back.position - p.position) == 0.0);
  CHECK(norm(back.forward - p.forward) == 0.0);
  CHECK_THROWS_AS(pose_from_json_text("{broken"), IoError);
  CHECK_THROWS_AS(pose_from_json_text("{\"position\": [1,2]}"), IoError);
}

TEST_CASE("msvs fixture directory round trip") {
  const std::string dir = temp_dir("fixtures");
  write_msvs_fixtures(dir, 2, 6, 9, 16);
  CHECK(fs::exists(dir + "/sequences.json"));
  const auto seqs = load_msvs_fixtures(dir);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].frames.size() == 6);
  CHECK(seqs[0].frames[0].pano.w == 32);
  const SequenceRecord ref = make_sequence_fixture(fold_seed(9, {0x5e90, 0}),
                                                   6, 16);
  CHECK(norm(seqs[0].frames[3].position - ref.frames[3].position) < 1e-9);
  fs::remove_all(dir);
}

TEST_CASE("pose scale derives from view spread") {
  SceneSample s;
  for (double x : {-2.0, 2.0}) {
    View v;
    v.image = Image(4, 4);
    v.pose.position = {x, 0, 0};
    s.inputs.push_back(std::move(v));
  }
  CHECK(scene_pose_scale(s) == doctest::Approx(0.5));
}
