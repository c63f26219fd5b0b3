// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "erupt/blas.hpp"
#include "erupt/config.hpp"
#include "erupt/dataset.hpp"
#include "erupt/losses.hpp"
#include "erupt/metrics.hpp"
#include "erupt/optimizer.hpp"
#include "erupt/tensor_archive.hpp"

namespace erupt {

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Stream tags for deriving independent per-purpose seeds.
inline constexpr std::uint64_t kSeedShuffle = 0x5f1e;
inline constexpr std::uint64_t kSeedMode = 0x30de;
inline constexpr std::uint64_t kSeedPosed = 0x705e;
inline constexpr std::uint64_t kSeedTargetPick = 0x7a26;

// Worker count respecting the ERUPT_THREADS environment cap.
inline int resolved_workers(int requested) {
  if (requested < 1) requested = 1;
  if (const char* env = std::getenv("ERUPT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || cap < 1)
      throw ValueError("ERUPT_THREADS must be a positive integer, got '" +
                       std::string(env) + "'");
    requested = std::min<long>(requested, cap);
  }
  return requested;
}

// Scene provider: either an in-memory list or a lazily loaded directory tree.
class SceneSource {
 public:
  SceneSource() = default;
  explicit SceneSource(std::vector<SceneSample> scenes)
      : mem_(std::move(scenes)) {}
  explicit SceneSource(const std::string& root)
      : dirs_(list_scene_dirs(root)) {}

  static SceneSource from_dirs(std::vector<std::string> dirs) {
    SceneSource s;
    s.dirs_ = std::move(dirs);
    return s;
  }

  std::size_t size() const { return dirs_.empty() ? mem_.size() : dirs_.size(); }
  bool empty() const { return size() == 0; }

  SceneSample get(std::size_t i) const {
    if (dirs_.empty()) {
      if (i >= mem_.size()) throw ValueError("scene index out of range");
      return mem_[i];
    }
    if (i >= dirs_.size()) throw ValueError("scene index out of range");
    return load_scene(dirs_[i]);
  }

 private:
  std::vector<SceneSample> mem_;
  std::vector<std::string> dirs_;
};

struct StepLog {
  std::int64_t step = 0;
  double lr = 0;
  double l_img = 0, l_cam = 0, l_tok = 0, l_total = 0;
  int mode_latent = 0, mode_gt = 0, mode_both = 0;
};

struct EvalResult {
  double psnr = 0;
  double ssim = 0;
  double baseline_psnr = 0;  // per-scene mean of the input views as predictor
  int scenes = 0;
  int targets = 0;
};

// Pixelwise mean of the input views; the trivial predictor a trained model
// has to beat.
inline Image mean_input_image(const SceneSample& s) {
  if (s.inputs.empty()) throw ValueError("mean_input_image: no inputs");
  Image out(s.inputs[0].image.h, s.inputs[0].image.w);
  for (const auto& v : s.inputs)
    for (std::size_t i = 0; i < out.px.size(); ++i) out.px[i] += v.image.px[i];
  for (float& p : out.px) p /= float(s.inputs.size());
  return out;
}

// Orchestrates optimization: deterministic shuffling, target-mode sampling,
// pose-dropout, multi-worker gradient accumulation with a fixed reduction
// order, checkpointing, and CSV logging.
class Trainer {
 public:
  Trainer(ModelConfig mc, TrainConfig tc, SceneSource data)
      : model_cfg_(mc),
        cfg_(tc),
        data_(std::move(data)),
        model_(std::make_unique<Model<float>>(mc, tc.seed)),
        adam_(model_->params(), AdamWConfig{0.9, 0.999, 1e-8,
                                            tc.weight_decay}) {
    cfg_.validate();
    if (data_.empty()) throw ValueError("trainer: empty scene source");
    pin_blas_threads();
  }

  Model<float>& model() { return *model_; }
  const std::vector<StepLog>& log() const { return log_; }
  int epoch() const { return epoch_; }
  std::int64_t step() const { return step_; }

  std::int64_t steps_per_epoch() const {
    return (std::int64_t(data_.size()) + cfg_.batch_scenes - 1) /
           cfg_.batch_scenes;
  }
  std::int64_t total_steps() const {
    return steps_per_epoch() * cfg_.epochs;
  }
  // Short runs clamp the warmup instead of rejecting the config.
  double current_lr() const {
    return lr_schedule(step_, total_steps(),
                       std::min<std::int64_t>(cfg_.warmup_steps, total_steps()),
                       cfg_.lr);
  }

  // Runs the remaining epochs (no-op when already finished).
  void fit() {
    while (epoch_ < cfg_.epochs) run_epoch();
  }

  void run_epoch() {
    if (epoch_ >= cfg_.epochs) return;
    std::vector<std::size_t> order(data_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(fold_seed(cfg_.seed, {kSeedShuffle, std::uint64_t(epoch_)}));
    deterministic_shuffle(order, shuffle_rng);

    for (std::size_t b = 0; b < order.size(); b += std::size_t(cfg_.batch_scenes)) {
      const std::size_t end = std::min(order.size(),
                                       b + std::size_t(cfg_.batch_scenes));
      std::vector<std::size_t> batch(order.begin() + std::ptrdiff_t(b),
                                     order.begin() + std::ptrdiff_t(end));
      run_batch(batch);
    }
    ++epoch_;
    maybe_checkpoint();
  }

  // ---- evaluation ----------------------------------------------------------

  // Renders every target of the selected scenes from the inputs alone
  // (true-pose conditioning) and scores against ground truth.
  EvalResult evaluate(const SceneSource& scenes, std::size_t max_scenes = 0) {
    EvalResult r;
    const std::size_t n =
        max_scenes == 0 ? scenes.size() : std::min(max_scenes, scenes.size());
    for (std::size_t si = 0; si < n; ++si) {
      const SceneSample s = scenes.get(si);
      validate_scene(s);
      if (s.targets.empty()) continue;
      const double scale = scene_pose_scale(s);
      const Image base = mean_input_image(s);
      Graph<float> g;
      g.set_recording(false);
      std::vector<Tensor<float>> images;
      for (const auto& v : s.inputs)
        images.push_back(g.constant(image_to_array<float>(v.image)));
      SceneEncoding<float> enc =
          model_->encode_scene(g, images, int(s.inputs.size()));
      for (const auto& t : s.targets) {
        const RelativePose rel = relative_pose(t.pose, s.inputs[0].pose);
        Tensor<float> cond = model_->conditioning(
            g, TargetMode::kGtOnly, nullptr, &rel, scale);
        Tensor<float> pred = model_->decode_image(g, enc, cond);
        const Array<float> gt = image_to_array<float>(t.image);
        r.psnr += psnr(pred.value(), gt);
        r.ssim += ssim(pred.value(), gt, t.image.h, t.image.w);
        r.baseline_psnr += psnr(image_to_array<float>(base), gt);
        ++r.targets;
      }
      ++r.scenes;
    }
    if (r.targets > 0) {
      r.psnr /= r.targets;
      r.ssim /= r.targets;
      r.baseline_psnr /= r.targets;
    }
    return r;
  }

  // Renders one novel view of a scene from its inputs.
  Image render_view(const SceneSample& s, const CameraPose& pose,
                    int render_size = 0) {
    validate_scene(s);
    SceneSample probe = s;
    probe.targets.clear();
    View v;
    v.pose = pose;
    probe.targets.push_back(v);
    const double scale = scene_pose_scale(probe);
    Graph<float> g;
    g.set_recording(false);
    std::vector<Tensor<float>> images;
    for (const auto& in : s.inputs)
      images.push_back(g.constant(image_to_array<float>(in.image)));
    SceneEncoding<float> enc =
        model_->encode_scene(g, images, int(s.inputs.size()));
    const RelativePose rel = relative_pose(pose, s.inputs[0].pose);
    Tensor<float> cond =
        model_->conditioning(g, TargetMode::kGtOnly, nullptr, &rel, scale);
    Tensor<float> img = model_->decode_image(g, enc, cond, render_size);
    const int r = render_size == 0 ? model_cfg_.image_size : render_size;
    return array_to_image(img.value(), r, r);
  }

  // ---- checkpointing -------------------------------------------------------

  void save_checkpoint(const std::string& dir) const {
    namespace fs = std::filesystem;
    const std::string tmp = dir + ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    std::vector<std::pair<std::string, Array<float>>> params;
    for (const auto& [name, e] : model_->params().entries())
      params.emplace_back(name, e.value.clone());
    save_tensor_archive(tmp + "/params", params);
    save_tensor_archive(tmp + "/adam_m", adam_.moments_m());
    save_tensor_archive(tmp + "/adam_v", adam_.moments_v());
    nlohmann::json state{{"epoch", epoch_},
                         {"step", step_},
                         {"adam_t", adam_.t()},
                         {"model", model_config_to_json(model_cfg_)},
                         {"train", train_config_to_json(cfg_)}};
    std::ofstream f(tmp + "/state.json");
    if (!f) throw IoError("cannot write " + tmp + "/state.json");
    f << state.dump(2) << "\n";
    f.close();
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + dir);
  }

  // Restores parameters, optimizer moments and progress counters. The
  // stored configuration must match (out_dir excepted) so the continued run
  // is bit-identical to an uninterrupted one.
  void load_checkpoint(const std::string& dir) {
    std::ifstream f(dir + "/state.json");
    if (!f) throw IoError("cannot read " + dir + "/state.json");
    nlohmann::json state;
    try {
      state = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("invalid checkpoint state in " + dir + ": " + e.what());
    }
    nlohmann::json stored_model = state.at("model");
    nlohmann::json stored_train = state.at("train");
    nlohmann::json mine_train = train_config_to_json(cfg_);
    stored_train.erase("out_dir");
    mine_train.erase("out_dir");
    if (stored_model != model_config_to_json(model_cfg_))
      throw ValueError("checkpoint model config does not match: stored " +
                       stored_model.dump() + " vs current " +
                       model_config_to_json(model_cfg_).dump());
    if (stored_train != mine_train)
      throw ValueError("checkpoint train config does not match: stored " +
                       stored_train.dump() + " vs current " +
                       mine_train.dump());

    auto params = load_tensor_archive<float>(dir + "/params");
    auto& entries = model_->params().entries();
    if (params.size() != entries.size())
      throw IoError("checkpoint parameter count mismatch in " + dir);
    for (auto& [name, a] : params) {
      auto it = entries.find(name);
      if (it == entries.end())
        throw IoError("checkpoint has unknown parameter " + name);
      if (it->second.value.shape() != a.shape())
        throw ShapeError("checkpoint shape mismatch for " + name);
      std::copy(a.data(), a.data() + a.size(), it->second.value.data());
    }
    adam_.restore(load_tensor_archive<float>(dir + "/adam_m"),
                  load_tensor_archive<float>(dir + "/adam_v"),
                  state.at("adam_t").get<std::int64_t>());
    epoch_ = state.at("epoch").get<int>();
    step_ = state.at("step").get<std::int64_t>();
    sync_workers_ = true;
  }

  // ---- deterministic sampling helpers (exposed for tests) ------------------

  TargetMode sample_mode(int epoch, std::size_t scene, std::size_t target) const {
    Rng rng(fold_seed(cfg_.seed, {kSeedMode, std::uint64_t(epoch),
                                  std::uint64_t(scene), std::uint64_t(target)}));
    return static_cast<TargetMode>(rng.uniform_int(3));
  }

  // Pose availability is a property of (seed, scene, target): stable across
  // epochs so a target never flips between posed and unposed.
  bool target_posed(std::size_t scene, std::size_t target) const {
    if (cfg_.posed_fraction >= 1.0) return true;
    Rng rng(fold_seed(cfg_.seed, {kSeedPosed, std::uint64_t(scene),
                                  std::uint64_t(target)}));
    return rng.uniform() < cfg_.posed_fraction;
  }

  std::vector<std::size_t> pick_targets(int epoch, std::size_t scene,
                                        std::size_t available) const {
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (available <= std::size_t(cfg_.targets_per_scene)) return idx;
    Rng rng(fold_seed(cfg_.seed, {kSeedTargetPick, std::uint64_t(epoch),
                                  std::uint64_t(scene)}));
    deterministic_shuffle(idx, rng);
    idx.resize(std::size_t(cfg_.targets_per_scene));
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  struct SceneResult {
    double l_img = 0, l_cam = 0, l_tok = 0, l_total = 0;
    int modes[3] = {0, 0, 0};
  };

  template <class V>
  static void deterministic_shuffle(std::vector<V>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[std::size_t(rng.uniform_int(int(i)))]);
  }

  void run_batch(const std::vector<std::size_t>& batch) {
    model_->params().zero_grad();
    const int k = std::min<int>(resolved_workers(cfg_.workers),
                                int(batch.size()));
    std::vector<SceneResult> results(batch.size());
    const double inv_batch = 1.0 / double(batch.size());

    if (k <= 1) {
      for (std::size_t i = 0; i < batch.size(); ++i)
        results[i] = train_scene(*model_, batch[i], inv_batch);
    } else {
      ensure_workers(k);
      for (int w = 0; w < k; ++w) workers_[std::size_t(w)]->params().zero_grad();
      if (sync_workers_) push_values_to_workers();
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors{std::size_t(k)};
      for (int w = 0; w < k; ++w) {
        threads.emplace_back([&, w] {
          try {
            for (std::size_t i = std::size_t(w); i < batch.size();
                 i += std::size_t(k))
              results[i] = train_scene(*workers_[std::size_t(w)], batch[i],
                                       inv_batch);
          } catch (...) {
            errors[std::size_t(w)] = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      // Fixed reduction order: worker 0 first, then worker 1, ...
      auto& main_entries = model_->params().entries();
      for (int w = 0; w < k; ++w)
        for (auto& [name, e] : workers_[std::size_t(w)]->params().entries()) {
          Array<float>& dst = main_entries.at(name).grad;
          for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += e.grad[i];
        }
      sync_workers_ = true;  // values change below
    }

    StepLog row;
    row.step = step_;
    for (const auto& r : results) {
      row.l_img += r.l_img * inv_batch;
      row.l_cam += r.l_cam * inv_batch;
      row.l_tok += r.l_tok * inv_batch;
      row.l_total += r.l_total * inv_batch;
      row.mode_latent += r.modes[0];
      row.mode_gt += r.modes[1];
      row.mode_both += r.modes[2];
    }
    if (!std::isfinite(row.l_total))
      diverged("batch mean became non-finite", row);

    row.lr = current_lr();
    adam_.step(row.lr);
    ++step_;
    log_.push_back(row);
    append_csv(row);
  }

  // Forward/backward for one scene; gradients scaled by 1/batch so the
  // accumulated update is the batch mean.
  SceneResult train_scene(Model<float>& model, std::size_t scene_index,
                          double inv_batch) {
    const SceneSample s = data_.get(scene_index);
    validate_scene(s);
    if (s.targets.empty())
      throw ValueError("scene " + std::to_string(scene_index) +
                       " has no target views");
    const int n_in = int(s.inputs.size());
    const double scale = scene_pose_scale(s);
    const std::vector<std::size_t> chosen =
        pick_targets(epoch_, scene_index, s.targets.size());

    Graph<float> g;
    std::vector<Tensor<float>> images;
    for (const auto& v : s.inputs)
      images.push_back(g.constant(image_to_array<float>(v.image)));
    for (std::size_t t : chosen)
      images.push_back(g.constant(image_to_array<float>(s.targets[t].image)));
    SceneEncoding<float> enc = model.encode_scene(g, images, n_in);

    std::vector<PosePrediction<float>> preds;
    for (const auto& ct : enc.camera_tokens)
      preds.push_back(model.estimate_pose(g, ct));

    // Camera supervision: every input plus each posed selected target.
    std::vector<PosePrediction<float>> cam_preds;
    std::vector<RelativePose> cam_gts;
    const CameraPose& ref = s.inputs[0].pose;
    for (int i = 0; i < n_in; ++i) {
      cam_preds.push_back(preds[std::size_t(i)]);
      cam_gts.push_back(relative_pose(s.inputs[std::size_t(i)].pose, ref));
    }

    SceneResult out;
    std::vector<Tensor<float>> conds;
    std::vector<Array<float>> gt_images;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      const std::size_t t = chosen[j];
      const View& tv = s.targets[t];
      const bool posed = tv.posed && target_posed(scene_index, t);
      const RelativePose rel = relative_pose(tv.pose, ref);
      if (posed) {
        cam_preds.push_back(preds[std::size_t(n_in) + j]);
        cam_gts.push_back(rel);
      }
      TargetMode mode = sample_mode(epoch_, scene_index, t);
      if (!posed && mode != TargetMode::kLatentOnly)
        mode = TargetMode::kLatentOnly;  // true pose unavailable
      ++out.modes[int(mode)];
      conds.push_back(model.conditioning(g, mode, &preds[std::size_t(n_in) + j],
                                         posed ? &rel : nullptr, scale));
      gt_images.push_back(image_to_array<float>(tv.image));
    }

    std::vector<Tensor<float>> rendered = model.decode_images(g, enc, conds);
    Tensor<float> l_img = image_l2(rendered[0], g.constant(gt_images[0].clone()));
    for (std::size_t j = 1; j < rendered.size(); ++j)
      l_img = add(l_img,
                  image_l2(rendered[j], g.constant(gt_images[j].clone())));
    l_img = mul_scalar(l_img, 1.0f / float(rendered.size()));

    Tensor<float> l_tok;
    if (cfg_.token_decoder) {
      for (std::size_t j = 0; j < chosen.size(); ++j) {
        Tensor<float> teacher =
            g.constant(enc.extractor_grid[std::size_t(n_in) + j].value());
        Tensor<float> predicted = model.decode_tokens(g, enc, conds[j]);
        Tensor<float> l = token_contrastive(predicted, teacher);
        l_tok = l_tok.defined() ? add(l_tok, l) : l;
      }
      l_tok = mul_scalar(l_tok, 1.0f / float(chosen.size()));
    }

    Tensor<float> l_cam = camera_loss_mean(g, cam_preds, cam_gts);
    const bool include_camera = cfg_.posed_fraction >= 1.0;
    LossBreakdown<float> loss =
        total_loss(l_img, l_cam, l_tok, include_camera, cfg_.weights);

    out.l_img = loss.image.value()[0];
    out.l_cam = loss.camera.value()[0];
    out.l_tok = loss.token.defined() ? loss.token.value()[0] : 0.0;
    out.l_total = loss.total.value()[0];
    if (!std::isfinite(out.l_total)) {
      StepLog snap;
      snap.step = step_;
      snap.l_img = out.l_img;
      snap.l_cam = out.l_cam;
      snap.l_tok = out.l_tok;
      snap.l_total = out.l_total;
      diverged("scene " + std::to_string(scene_index) +
               " produced a non-finite loss", snap);
    }
    g.backward(mul_scalar(loss.total, float(inv_batch)));
    return out;
  }

  [[noreturn]] void diverged(const std::string& why, const StepLog& row) {
    std::ostringstream os;
    os << "training diverged: " << why << " (epoch " << epoch_ << ", step "
       << step_ << ", l_img " << row.l_img << ", l_cam " << row.l_cam
       << ", l_tok " << row.l_tok << ", l_total " << row.l_total << ", lr "
       << current_lr() << ")";
    if (!cfg_.out_dir.empty()) {
      std::ofstream f(cfg_.out_dir + "/diverged.txt");
      f << os.str() << "\n";
    }
    throw TrainingDiverged(os.str());
  }

  void ensure_workers(int k) {
    while (int(workers_.size()) < k) {
      workers_.push_back(std::make_unique<Model<float>>(model_cfg_, cfg_.seed));
      sync_workers_ = true;
    }
  }

  void push_values_to_workers() {
    const auto& src = model_->params().entries();
    for (auto& w : workers_) {
      auto& dst = w->params().entries();
      for (const auto& [name, e] : src)
        std::copy(e.value.data(), e.value.data() + e.value.size(),
                  dst.at(name).value.data());
    }
    sync_workers_ = false;
  }

  void maybe_checkpoint() {
    if (cfg_.out_dir.empty()) return;
    if (epoch_ % cfg_.checkpoint_every == 0 || epoch_ == cfg_.epochs)
      save_checkpoint(cfg_.out_dir + "/checkpoint");
  }

  void append_csv(const StepLog& r) {
    if (cfg_.out_dir.empty()) return;
    const std::string path = cfg_.out_dir + "/train_log.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream f(path, std::ios::app);
    if (!f) throw IoError("cannot append to " + path);
    if (fresh) {
      f << "# training log: one row per optimizer step; losses are batch "
           "means\n";
      f << "step,lr,l_img,l_cam,l_tok,l_total,mode_latent,mode_gt,mode_both\n";
    }
    f << r.step << ',' << r.lr << ',' << r.l_img << ',' << r.l_cam << ','
      << r.l_tok << ',' << r.l_total << ',' << r.mode_latent << ','
      << r.mode_gt << ',' << r.mode_both << '\n';
  }

  ModelConfig model_cfg_;
  TrainConfig cfg_;
  SceneSource data_;
  std::unique_ptr<Model<float>> model_;
  AdamW<float> adam_;
  std::vector<std::unique_ptr<Model<float>>> workers_;
  bool sync_workers_ = true;
  int epoch_ = 0;
  std::int64_t step_ = 0;
  std::vector<StepLog> log_;
};

}  // namespace erupt
