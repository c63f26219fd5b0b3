// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#include "erupt/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace erupt {

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw IoError("pose JSON: expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pose_to_json_obj(const CameraPose& p) {
  return json{{"position", vec_to_json(p.position)},
              {"right", vec_to_json(p.right)},
              {"up", vec_to_json(p.up)},
              {"forward", vec_to_json(p.forward)}};
}

CameraPose pose_from_json_obj(const json& j) {
  CameraPose p;
  p.position = vec_from_json(j.at("position"));
  p.right = vec_from_json(j.at("right"));
  p.up = vec_from_json(j.at("up"));
  p.forward = vec_from_json(j.at("forward"));
  return p;
}

}  // namespace

std::string pose_to_json(const CameraPose& p) {
  return pose_to_json_obj(p).dump(2);
}

CameraPose pose_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("pose JSON parse error: ") + e.what());
  }
  return pose_from_json_obj(j);
}

void save_scene(const std::string& dir, const SceneSample& s) {
  validate_scene(s);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("save_scene: cannot create " + dir);

  json poses;
  poses["inputs"] = json::array();
  poses["targets"] = json::array();
  for (std::size_t k = 0; k < s.inputs.size(); ++k) {
    save_png(dir + "/input_" + std::to_string(k) + ".png", s.inputs[k].image);
    poses["inputs"].push_back(pose_to_json_obj(s.inputs[k].pose));
  }
  for (std::size_t k = 0; k < s.targets.size(); ++k) {
    save_png(dir + "/target_" + std::to_string(k) + ".png",
             s.targets[k].image);
    json t = pose_to_json_obj(s.targets[k].pose);
    t["posed"] = s.targets[k].posed;
    poses["targets"].push_back(std::move(t));
  }
  std::ofstream out(dir + "/poses.json");
  if (!out) throw IoError("save_scene: cannot write " + dir + "/poses.json");
  out << poses.dump(2) << "\n";
}

SceneSample load_scene(const std::string& dir) {
  std::ifstream in(dir + "/poses.json");
  if (!in) throw IoError("load_scene: cannot read " + dir + "/poses.json");
  json poses;
  try {
    in >> poses;
  } catch (const json::parse_error& e) {
    throw IoError("load_scene: " + dir + "/poses.json: " + e.what());
  }
  SceneSample s;
  const auto& ji = poses.at("inputs");
  for (std::size_t k = 0; k < ji.size(); ++k) {
    View v;
    v.image = load_png(dir + "/input_" + std::to_string(k) + ".png");
    v.pose = pose_from_json_obj(ji[k]);
    s.inputs.push_back(std::move(v));
  }
  const auto& jt = poses.at("targets");
  for (std::size_t k = 0; k < jt.size(); ++k) {
    View v;
    v.image = load_png(dir + "/target_" + std::to_string(k) + ".png");
    v.pose = pose_from_json_obj(jt[k]);
    v.posed = jt[k].value("posed", true);
    s.targets.push_back(std::move(v));
  }
  validate_scene(s);
  return s;
}

std::vector<std::string> list_scene_dirs(const std::string& root) {
  const fs::path scenes = fs::path(root) / "scenes";
  if (!fs::exists(scenes))
    throw IoError("list_scene_dirs: no scenes/ under " + root);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(scenes))
    if (e.is_directory()) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace erupt
