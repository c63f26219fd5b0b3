// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>

#include "erupt/losses.hpp"
#include "erupt/model.hpp"
#include "json.hpp"

namespace erupt {

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 30;
  int batch_scenes = 16;
  int targets_per_scene = 5;
  double lr = 3e-4;
  int warmup_steps = 100;
  double weight_decay = 1e-4;
  double posed_fraction = 1.0;  // fraction of targets whose pose is usable
  int workers = 1;
  bool token_decoder = true;
  int checkpoint_every = 1;  // epochs
  std::string out_dir;       // empty: no checkpoints or CSV log
  LossWeights weights;

  void validate() const {
    if (epochs < 1) throw ValueError("train config: epochs must be >= 1");
    if (batch_scenes < 1)
      throw ValueError("train config: batch_scenes must be >= 1");
    if (targets_per_scene < 1)
      throw ValueError("train config: targets_per_scene must be >= 1");
    if (!(lr > 0)) throw ValueError("train config: lr must be positive");
    if (warmup_steps < 0)
      throw ValueError("train config: warmup_steps must be >= 0");
    if (posed_fraction < 0.0 || posed_fraction > 1.0)
      throw ValueError("train config: posed_fraction must lie in [0, 1]");
    if (workers < 1) throw ValueError("train config: workers must be >= 1");
    if (checkpoint_every < 1)
      throw ValueError("train config: checkpoint_every must be >= 1");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::set<std::string>& known,
                                const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ValueError(what + ": unknown key '" + it.key() + "'");
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"d", c.d},
                        {"heads", c.heads},
                        {"image_size", c.image_size},
                        {"patch", c.patch},
                        {"extractor_blocks", c.extractor_blocks},
                        {"scene_blocks", c.scene_blocks},
                        {"mlp_ratio", c.mlp_ratio},
                        {"freeze_extractor", c.freeze_extractor},
                        {"decoder_d", c.decoder_d},
                        {"decoder_heads", c.decoder_heads},
                        {"decoder_blocks", c.decoder_blocks},
                        {"decoder_mlp_ratio", c.decoder_mlp_ratio},
                        {"pose_freqs", c.pose_freqs}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValueError("model config: expected an object");
  detail::reject_unknown_keys(
      j,
      {"d", "heads", "image_size", "patch", "extractor_blocks",
       "scene_blocks", "mlp_ratio", "freeze_extractor", "decoder_d",
       "decoder_heads", "decoder_blocks", "decoder_mlp_ratio", "pose_freqs"},
      "model config");
  ModelConfig c;
  detail::get_if(j, "d", c.d);
  detail::get_if(j, "heads", c.heads);
  detail::get_if(j, "image_size", c.image_size);
  detail::get_if(j, "patch", c.patch);
  detail::get_if(j, "extractor_blocks", c.extractor_blocks);
  detail::get_if(j, "scene_blocks", c.scene_blocks);
  detail::get_if(j, "mlp_ratio", c.mlp_ratio);
  detail::get_if(j, "freeze_extractor", c.freeze_extractor);
  detail::get_if(j, "decoder_d", c.decoder_d);
  detail::get_if(j, "decoder_heads", c.decoder_heads);
  detail::get_if(j, "decoder_blocks", c.decoder_blocks);
  detail::get_if(j, "decoder_mlp_ratio", c.decoder_mlp_ratio);
  detail::get_if(j, "pose_freqs", c.pose_freqs);
  c.validate();
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"seed", c.seed},
                        {"epochs", c.epochs},
                        {"batch_scenes", c.batch_scenes},
                        {"targets_per_scene", c.targets_per_scene},
                        {"lr", c.lr},
                        {"warmup_steps", c.warmup_steps},
                        {"weight_decay", c.weight_decay},
                        {"posed_fraction", c.posed_fraction},
                        {"workers", c.workers},
                        {"token_decoder", c.token_decoder},
                        {"checkpoint_every", c.checkpoint_every},
                        {"out_dir", c.out_dir},
                        {"camera_weight", c.weights.camera},
                        {"token_weight", c.weights.token}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValueError("train config: expected an object");
  detail::reject_unknown_keys(
      j,
      {"seed", "epochs", "batch_scenes", "targets_per_scene", "lr",
       "warmup_steps", "weight_decay", "posed_fraction", "workers",
       "token_decoder", "checkpoint_every", "out_dir", "camera_weight",
       "token_weight"},
      "train config");
  TrainConfig c;
  detail::get_if(j, "seed", c.seed);
  detail::get_if(j, "epochs", c.epochs);
  detail::get_if(j, "batch_scenes", c.batch_scenes);
  detail::get_if(j, "targets_per_scene", c.targets_per_scene);
  detail::get_if(j, "lr", c.lr);
  detail::get_if(j, "warmup_steps", c.warmup_steps);
  detail::get_if(j, "weight_decay", c.weight_decay);
  detail::get_if(j, "posed_fraction", c.posed_fraction);
  detail::get_if(j, "workers", c.workers);
  detail::get_if(j, "token_decoder", c.token_decoder);
  detail::get_if(j, "checkpoint_every", c.checkpoint_every);
  detail::get_if(j, "out_dir", c.out_dir);
  detail::get_if(j, "camera_weight", c.weights.camera);
  detail::get_if(j, "token_weight", c.weights.token);
  c.validate();
  return c;
}

}  // namespace erupt
