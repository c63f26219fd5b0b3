// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "erupt/geometry.hpp"
#include "erupt/image.hpp"

namespace erupt {

// One rendered view with its camera. `posed` marks whether ground-truth
// camera parameters may be consumed during training.
struct View {
  Image image;
  CameraPose pose;
  bool posed = true;
};

// A training/eval unit: input views (inputs[0] is the reference frame that
// defines the coordinate system) plus target views.
struct SceneSample {
  std::vector<View> inputs;
  std::vector<View> targets;
};

inline void validate_scene(const SceneSample& s) {
  if (s.inputs.empty()) throw ValueError("scene has no input views");
  const int h = s.inputs[0].image.h, w = s.inputs[0].image.w;
  for (const auto& v : s.inputs)
    if (v.image.h != h || v.image.w != w)
      throw ValueError("scene input resolutions differ");
  for (const auto& v : s.targets)
    if (v.image.h != h || v.image.w != w)
      throw ValueError("scene target resolution differs from inputs");
}

// Per-scene pose scale for sine encoding: 1 / bounding radius of all view
// positions around their centroid, derived from the data so training and
// evaluation can never disagree.
inline double scene_pose_scale(const SceneSample& s) {
  Vec3 c{0, 0, 0};
  int n = 0;
  auto acc = [&](const std::vector<View>& vs) {
    for (const auto& v : vs) {
      c = c + v.pose.position;
      ++n;
    }
  };
  acc(s.inputs);
  acc(s.targets);
  if (n == 0) return 1.0;
  c = c * (1.0 / n);
  double r = 0;
  for (const auto& v : s.inputs) r = std::max(r, norm(v.pose.position - c));
  for (const auto& v : s.targets) r = std::max(r, norm(v.pose.position - c));
  return 1.0 / std::max(r, 1e-3);
}

// Directory layout: <dir>/input_<k>.png, target_<k>.png, poses.json.
void save_scene(const std::string& dir, const SceneSample& s);
SceneSample load_scene(const std::string& dir);

// Scene directories under <root>/scenes, sorted by name.
std::vector<std::string> list_scene_dirs(const std::string& root);

std::string pose_to_json(const CameraPose& p);
CameraPose pose_from_json_text(const std::string& text);

}  // namespace erupt
