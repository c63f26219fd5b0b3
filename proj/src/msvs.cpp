// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#include "erupt/msvs.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace erupt {

void write_msvs_fixtures(const std::string& dir, int n_sequences, int length,
                         std::uint64_t seed, int pano_height) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_msvs_fixtures: cannot create " + dir);
  json index = json::array();
  for (int s = 0; s < n_sequences; ++s) {
    const SequenceRecord rec = make_sequence_fixture(
        fold_seed(seed, {0x5e90, static_cast<std::uint64_t>(s)}), length,
        pano_height);
    json frames = json::array();
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "pano_%03d_%03zu.png", s, i);
      save_png(dir + "/" + name, rec.frames[i].pano);
      const Vec3& p = rec.frames[i].position;
      frames.push_back(json{{"pano", name},
                            {"position", {p.x, p.y, p.z}},
                            {"heading", rec.frames[i].heading}});
    }
    index.push_back(json{{"frames", std::move(frames)}});
  }
  std::ofstream out(dir + "/sequences.json");
  if (!out) throw IoError("write_msvs_fixtures: cannot write sequences.json");
  out << index.dump(2) << "\n";
}

std::vector<SequenceRecord> load_msvs_fixtures(const std::string& dir) {
  std::ifstream in(dir + "/sequences.json");
  if (!in) throw IoError("load_msvs_fixtures: cannot read " + dir +
                         "/sequences.json");
  json index;
  try {
    in >> index;
  } catch (const json::parse_error& e) {
    throw IoError("load_msvs_fixtures: " + dir + "/sequences.json: " +
                  e.what());
  }
  std::vector<SequenceRecord> out;
  for (const auto& jseq : index) {
    SequenceRecord rec;
    for (const auto& jf : jseq.at("frames")) {
      PanoFrame f;
      f.pano = load_png(dir + "/" + jf.at("pano").get<std::string>());
      const auto& p = jf.at("position");
      f.position = {p[0].get<double>(), p[1].get<double>(),
                    p[2].get<double>()};
      f.heading = jf.at("heading").get<double>();
      rec.frames.push_back(std::move(f));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace erupt
