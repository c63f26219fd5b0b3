// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry points: generate / train / render / eval / bench.
// Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "erupt/bench.hpp"
#include "erupt/msvs.hpp"
#include "erupt/scenegen.hpp"
#include "erupt/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace erupt;

namespace {

// Raised for configuration problems detected before real work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string scene_dir_name(int i) {
  std::ostringstream os;
  os << "scene_" << std::setw(5) << std::setfill('0') << i;
  return os.str();
}

ModelConfig preset_config(const std::string& name) {
  if (name == "desk") return ModelConfig::desk();
  if (name == "big") return ModelConfig::big();
  throw UsageError("unknown preset '" + name + "' (expected desk or big)");
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// Resolves model + train configs: preset defaults, then the optional JSON
// config file ({"model": {...}, "train": {...}}), then CLI flag overrides
// applied by the caller.
void apply_config_file(const std::string& path, ModelConfig& mc,
                       TrainConfig& tc) {
  if (path.empty()) return;
  const nlohmann::json j = load_json_file(path);
  if (!j.is_object()) throw UsageError(path + ": top level must be an object");
  for (const auto& [key, val] : j.items()) {
    (void)val;
    if (key != "model" && key != "train")
      throw UsageError(path + ": unknown key '" + key + "'");
  }
  try {
    if (j.contains("model")) {
      nlohmann::json merged = model_config_to_json(mc);
      merged.update(j.at("model"));
      mc = model_config_from_json(merged);
    }
    if (j.contains("train")) {
      nlohmann::json merged = train_config_to_json(tc);
      merged.update(j.at("train"));
      tc = train_config_from_json(merged);
    }
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// ---- generate ---------------------------------------------------------------

struct GenerateOpts {
  std::string kind = "toy";
  std::string out;
  std::string panoramas;
  int scenes = 100;
  std::uint64_t seed = 1;
  int image_size = 48;
  int views = 5;
  int inputs = 3;
  int min_objects = 4;
  int max_objects = 8;
  int sequences = 4;
  int seq_length = 8;
  int pano_height = 256;
};

void write_manifest(const std::string& dir, const nlohmann::json& j) {
  std::ofstream f(dir + "/dataset.json");
  if (!f) throw IoError("cannot write " + dir + "/dataset.json");
  f << j.dump(2) << "\n";
}

void cmd_generate(const GenerateOpts& o) {
  if (o.out.empty()) throw UsageError("generate: --out is required");
  if (fs::exists(o.out)) throw UsageError("generate: " + o.out + " exists");

  if (o.kind == "msvs-fixtures") {
    write_msvs_fixtures(o.out, o.sequences, o.seq_length, o.seed,
                        o.pano_height);
    std::cout << "wrote " << o.sequences << " panorama sequences to " << o.out
              << "\n";
    return;
  }
  if (o.kind != "toy" && o.kind != "msvs")
    throw UsageError("generate: unknown --kind '" + o.kind + "'");
  if (o.scenes < 1) throw UsageError("generate: --scenes must be >= 1");

  std::vector<SequenceRecord> seqs;
  if (o.kind == "msvs") {
    if (o.panoramas.empty())
      throw UsageError("generate: --kind msvs needs --panoramas");
    seqs = filter_sequences(load_msvs_fixtures(o.panoramas));
    if (seqs.empty())
      throw UsageError("generate: no usable sequences in " + o.panoramas);
  }

  // Scenes are written to a staging directory that is renamed into place on
  // success, so a failing run leaves nothing behind.
  const std::string tmp = o.out + ".partial";
  fs::remove_all(tmp);
  try {
    fs::create_directories(tmp + "/scenes");
    Rng rng(o.seed);
    for (int i = 0; i < o.scenes; ++i) {
      SceneSample s;
      if (o.kind == "toy") {
        ToySceneConfig cfg;
        cfg.image_size = o.image_size;
        cfg.n_views = o.views;
        cfg.n_inputs = o.inputs;
        cfg.min_objects = o.min_objects;
        cfg.max_objects = o.max_objects;
        s = generate_toy_scene(o.seed + std::uint64_t(i), cfg).second;
      } else {
        const auto& seq = seqs[std::size_t(i) % seqs.size()];
        s = sample_msvs_scene(seq, rng, o.image_size);
      }
      save_scene(tmp + "/scenes/" + scene_dir_name(i), s);
    }
    write_manifest(tmp, {{"kind", o.kind},
                         {"scenes", o.scenes},
                         {"seed", o.seed},
                         {"image_size", o.image_size},
                         {"views", o.views},
                         {"inputs", o.inputs}});
    fs::rename(tmp, o.out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  std::cout << "wrote " << o.scenes << " scenes to " << o.out << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  std::string config;
  std::string preset = "desk";
  std::string data;
  std::string out;
  std::string resume;
  int holdout = 0;     // scenes held out from the end of the list for eval
  int stop_after = 0;  // pause after N epochs of this run (0 = run to the end)
  // -1 / NaN sentinels: flag not given, keep config-file value.
  int epochs = -1;
  int batch = -1;
  int targets = -1;
  int warmup = -1;
  int workers = -1;
  int checkpoint_every = -1;
  double lr = -1;
  double weight_decay = -1;
  double posed_fraction = -1;
  std::int64_t seed = -1;
};

void cmd_train(const TrainOpts& o) {
  if (o.data.empty()) throw UsageError("train: --data is required");
  if (!fs::exists(o.data))
    throw UsageError("train: dataset not found: " + o.data);

  ModelConfig mc = preset_config(o.preset);
  TrainConfig tc;
  apply_config_file(o.config, mc, tc);
  if (o.epochs >= 0) tc.epochs = o.epochs;
  if (o.batch >= 0) tc.batch_scenes = o.batch;
  if (o.targets >= 0) tc.targets_per_scene = o.targets;
  if (o.warmup >= 0) tc.warmup_steps = o.warmup;
  if (o.workers >= 0) tc.workers = o.workers;
  if (o.checkpoint_every >= 0) tc.checkpoint_every = o.checkpoint_every;
  if (o.lr >= 0) tc.lr = o.lr;
  if (o.weight_decay >= 0) tc.weight_decay = o.weight_decay;
  if (o.posed_fraction >= 0) tc.posed_fraction = o.posed_fraction;
  if (o.seed >= 0) tc.seed = std::uint64_t(o.seed);
  tc.out_dir = o.out;
  try {
    mc.validate();
    tc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  std::vector<std::string> dirs;
  try {
    dirs = list_scene_dirs(o.data);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.holdout < 0 || std::size_t(o.holdout) >= dirs.size())
    throw UsageError("train: --holdout must leave at least one train scene");
  const SceneSample probe = load_scene(dirs.front());
  if (!probe.inputs.empty() && probe.inputs[0].image.h != mc.image_size)
    throw UsageError("train: dataset resolution " +
                     std::to_string(probe.inputs[0].image.h) +
                     " != model image_size " + std::to_string(mc.image_size));
  std::vector<std::string> eval_dirs(dirs.end() - o.holdout, dirs.end());
  dirs.resize(dirs.size() - std::size_t(o.holdout));

  if (!o.out.empty()) fs::create_directories(o.out);
  Trainer tr(mc, tc, SceneSource::from_dirs(std::move(dirs)));
  if (!o.resume.empty()) tr.load_checkpoint(o.resume);

  SceneSource eval_set = SceneSource::from_dirs(std::move(eval_dirs));
  const std::string eval_csv =
      o.out.empty() ? "" : o.out + "/eval_log.csv";
  const std::int64_t start_epoch = tr.epoch();
  while (tr.epoch() < tc.epochs) {
    if (o.stop_after > 0 && tr.epoch() - start_epoch >= o.stop_after) {
      std::cout << "pausing after " << o.stop_after
                << " epoch(s); resume with --resume " << o.out
                << "/checkpoint\n";
      break;
    }
    tr.run_epoch();
    std::cout << "epoch " << tr.epoch() << "/" << tc.epochs;
    if (!tr.log().empty()) {
      const auto& r = tr.log().back();
      std::cout << "  l_img " << r.l_img << "  l_cam " << r.l_cam << "  l_tok "
                << r.l_tok << "  l_total " << r.l_total;
    }
    if (!eval_set.empty()) {
      const EvalResult ev = tr.evaluate(eval_set);
      std::cout << "  holdout psnr " << ev.psnr << " dB  ssim " << ev.ssim
                << "  baseline " << ev.baseline_psnr << " dB";
      if (!eval_csv.empty()) {
        const bool fresh = !fs::exists(eval_csv);
        std::ofstream f(eval_csv, std::ios::app);
        if (fresh) f << "epoch,psnr,ssim,baseline_psnr\n";
        f << tr.epoch() << ',' << std::setprecision(17) << ev.psnr << ','
          << ev.ssim << ',' << ev.baseline_psnr << "\n";
      }
    }
    std::cout << std::endl;
  }
}

// ---- checkpoint loading shared by render/eval -------------------------------

Trainer trainer_from_checkpoint(const std::string& ckpt, SceneSource data) {
  const nlohmann::json state = load_json_file(ckpt + "/state.json");
  ModelConfig mc;
  TrainConfig tc;
  try {
    mc = model_config_from_json(state.at("model"));
    tc = train_config_from_json(state.at("train"));
  } catch (const std::exception& e) {
    throw UsageError(ckpt + "/state.json: " + e.what());
  }
  Trainer tr(mc, tc, std::move(data));
  tr.load_checkpoint(ckpt);
  return tr;
}

// ---- render -----------------------------------------------------------------

struct RenderOpts {
  std::string checkpoint;
  std::string scene;
  std::string out;
  std::string pose_file;
  int orbit = 0;
  int render_size = 0;
};

// Point closest to all input-view rays (least squares); falls back to the
// camera centroid when the rays are near-parallel.
Vec3 estimate_scene_center(const SceneSample& s) {
  double A[3][3] = {};
  double b[3] = {};
  for (const auto& v : s.inputs) {
    const Vec3 f = v.pose.forward, p = v.pose.position;
    const double ff[3] = {f.x, f.y, f.z};
    const double pp[3] = {p.x, p.y, p.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const double m = (r == c ? 1.0 : 0.0) - ff[r] * ff[c];
        A[r][c] += m;
        b[r] += m * pp[c];
      }
  }
  // Gaussian elimination with partial pivoting.
  int piv[3] = {0, 1, 2};
  for (int k = 0; k < 3; ++k) {
    int best = k;
    for (int r = k + 1; r < 3; ++r)
      if (std::abs(A[piv[r]][k]) > std::abs(A[piv[best]][k])) best = r;
    std::swap(piv[k], piv[best]);
    if (std::abs(A[piv[k]][k]) < 1e-9) {
      Vec3 c{};
      for (const auto& v : s.inputs) c = c + v.pose.position;
      return c * (1.0 / double(s.inputs.size()));
    }
    for (int r = k + 1; r < 3; ++r) {
      const double m = A[piv[r]][k] / A[piv[k]][k];
      for (int c = k; c < 3; ++c) A[piv[r]][c] -= m * A[piv[k]][c];
      b[piv[r]] -= m * b[piv[k]];
    }
  }
  double x[3];
  for (int k = 2; k >= 0; --k) {
    double acc = b[piv[k]];
    for (int c = k + 1; c < 3; ++c) acc -= A[piv[k]][c] * x[c];
    x[k] = acc / A[piv[k]][k];
  }
  return {x[0], x[1], x[2]};
}

Vec3 parse_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw UsageError(what + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<CameraPose> poses_from_file(const std::string& path,
                                        const Vec3& center) {
  const nlohmann::json j = load_json_file(path);
  std::vector<nlohmann::json> items;
  if (j.is_array())
    items.assign(j.begin(), j.end());
  else
    items.push_back(j);
  std::vector<CameraPose> out;
  for (const auto& it : items) {
    if (!it.is_object()) throw UsageError(path + ": pose must be an object");
    for (const auto& [key, val] : it.items()) {
      (void)val;
      if (key != "position" && key != "look_at" && key != "up")
        throw UsageError(path + ": unknown key '" + key + "'");
    }
    if (!it.contains("position"))
      throw UsageError(path + ": pose needs a position");
    const Vec3 pos = parse_vec3(it.at("position"), "position");
    const Vec3 tgt =
        it.contains("look_at") ? parse_vec3(it.at("look_at"), "look_at")
                               : center;
    const Vec3 up =
        it.contains("up") ? parse_vec3(it.at("up"), "up") : Vec3{0, 1, 0};
    out.push_back(look_at(pos, tgt, up));
  }
  return out;
}

void cmd_render(const RenderOpts& o) {
  if (o.checkpoint.empty()) throw UsageError("render: --checkpoint required");
  if (o.scene.empty()) throw UsageError("render: --scene required");
  if (o.out.empty()) throw UsageError("render: --out required");
  if ((o.orbit > 0) == !o.pose_file.empty())
    throw UsageError("render: give exactly one of --orbit or --poses");

  const SceneSample scene = load_scene(o.scene);
  const Vec3 center = estimate_scene_center(scene);

  std::vector<CameraPose> poses;
  if (o.orbit > 0) {
    // A circle around the scene center at the mean input-camera height and
    // horizontal distance.
    double height = 0, radius = 0;
    for (const auto& v : scene.inputs) {
      height += v.pose.position.y;
      const Vec3 d = v.pose.position - center;
      radius += std::sqrt(d.x * d.x + d.z * d.z);
    }
    height /= double(scene.inputs.size());
    radius /= double(scene.inputs.size());
    for (int k = 0; k < o.orbit; ++k) {
      const double a = 2.0 * M_PI * double(k) / double(o.orbit);
      const Vec3 pos{center.x + radius * std::cos(a), height,
                     center.z + radius * std::sin(a)};
      poses.push_back(look_at(pos, center, {0, 1, 0}));
    }
  } else {
    poses = poses_from_file(o.pose_file, center);
  }

  Trainer tr = trainer_from_checkpoint(o.checkpoint,
                                       SceneSource({scene}));
  fs::create_directories(o.out);
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const Image img = tr.render_view(scene, poses[k], o.render_size);
    std::ostringstream name;
    name << o.out << "/frame_" << std::setw(3) << std::setfill('0') << k
         << ".png";
    save_png(name.str(), img);
  }
  std::cout << "wrote " << poses.size() << " frames to " << o.out << "\n";
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string out;  // CSV path; empty = stdout
  int max_scenes = 0;
};

void cmd_eval(const EvalOpts& o) {
  if (o.checkpoint.empty()) throw UsageError("eval: --checkpoint required");
  if (o.data.empty()) throw UsageError("eval: --data required");
  std::vector<std::string> dirs;
  try {
    dirs = list_scene_dirs(o.data);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.max_scenes > 0 && std::size_t(o.max_scenes) < dirs.size())
    dirs.resize(std::size_t(o.max_scenes));

  Trainer tr = trainer_from_checkpoint(
      o.checkpoint, SceneSource::from_dirs(dirs));

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "scene,psnr,ssim,baseline_psnr\n";
  double sum_psnr = 0, sum_ssim = 0, sum_base = 0;
  int rows = 0;
  for (const auto& dir : dirs) {
    const EvalResult r =
        tr.evaluate(SceneSource({load_scene(dir)}));
    if (r.targets == 0) continue;
    csv << fs::path(dir).filename().string() << ',' << r.psnr << ','
        << r.ssim << ',' << r.baseline_psnr << "\n";
    sum_psnr += r.psnr;
    sum_ssim += r.ssim;
    sum_base += r.baseline_psnr;
    ++rows;
  }
  if (rows == 0) throw ValueError("eval: no scenes with targets");
  csv << "mean," << sum_psnr / rows << ',' << sum_ssim / rows << ','
      << sum_base / rows << "\n";

  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(o.out);
    if (!f) throw IoError("cannot write " + o.out);
    f << csv.str();
    std::cout << "wrote " << rows << " scene rows to " << o.out << "\n";
  }
}

// ---- bench ------------------------------------------------------------------

struct BenchOpts {
  std::string preset = "desk";
  std::string out;  // CSV path; empty = stdout
  int trials = 5;
  std::int64_t budget_mb = 0;
  std::uint64_t seed = 7;
  std::vector<int> resolutions{64, 128};
  std::vector<int> inputs{1, 2, 4};
};

void cmd_bench(const BenchOpts& o) {
  if (o.trials < 1) throw UsageError("bench: --trials must be >= 1");
  ModelConfig mc = preset_config(o.preset);
  Model<float> model(mc, o.seed);

  BenchReport rep;
  const std::int64_t budget = o.budget_mb * (std::int64_t(1) << 20);
  for (int res : o.resolutions) {
    if (res % kDecoderPatch != 0)
      throw UsageError("bench: resolutions must be divisible by 8");
    rep.rows.push_back(
        bench_decode(model, res, DecoderKind::kPatch, o.trials, budget));
    rep.rows.push_back(
        bench_decode(model, res, DecoderKind::kPixel, o.trials, budget));
  }
  for (int n : o.inputs)
    rep.rows.push_back(bench_scene(model, n, o.trials));

  std::vector<std::string> preamble{
      "erupt bench",
      "preset: " + o.preset,
      "trials: " + std::to_string(o.trials),
      "seed: " + std::to_string(o.seed),
      "blas_threads: 1",
      "workers: 1",
  };
  if (o.out.empty()) {
    rep.write_csv(std::cout, preamble);
  } else {
    std::ofstream f(o.out);
    if (!f) throw IoError("cannot write " + o.out);
    rep.write_csv(f, preamble);
    std::cout << "wrote " << rep.rows.size() << " bench rows to " << o.out
              << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  pin_blas_threads();
  CLI::App app{"latent-pose multi-view synthesis workbench"};
  app.require_subcommand(1);

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "write a procedural dataset");
  g->add_option("--kind", gen.kind, "toy | msvs | msvs-fixtures");
  g->add_option("--out", gen.out, "output directory (must not exist)");
  g->add_option("--scenes", gen.scenes, "number of scenes");
  g->add_option("--seed", gen.seed, "generation seed");
  g->add_option("--image-size", gen.image_size, "view resolution");
  g->add_option("--views", gen.views, "views per toy scene");
  g->add_option("--inputs", gen.inputs, "input views per toy scene");
  g->add_option("--min-objects", gen.min_objects, "toy objects lower bound");
  g->add_option("--max-objects", gen.max_objects, "toy objects upper bound");
  g->add_option("--panoramas", gen.panoramas, "msvs fixture directory");
  g->add_option("--sequences", gen.sequences, "fixture sequence count");
  g->add_option("--length", gen.seq_length, "fixture sequence length");
  g->add_option("--pano-height", gen.pano_height, "fixture panorama height");
  g->callback([&] { cmd_generate(gen); });

  TrainOpts trn;
  auto* t = app.add_subcommand("train", "optimize a model on a dataset");
  t->add_option("--config", trn.config, "JSON config file");
  t->add_option("--preset", trn.preset, "desk | big");
  t->add_option("--data", trn.data, "dataset directory");
  t->add_option("--out", trn.out, "checkpoint/log directory");
  t->add_option("--resume", trn.resume, "checkpoint directory to resume");
  t->add_option("--stop-after", trn.stop_after,
                "pause after N epochs of this invocation");
  t->add_option("--holdout", trn.holdout, "scenes held out for eval");
  t->add_option("--epochs", trn.epochs, "training epochs");
  t->add_option("--batch", trn.batch, "scenes per optimizer step");
  t->add_option("--targets-per-scene", trn.targets, "targets per scene visit");
  t->add_option("--warmup", trn.warmup, "warmup steps");
  t->add_option("--workers", trn.workers, "gradient workers");
  t->add_option("--checkpoint-every", trn.checkpoint_every,
                "epochs between checkpoints");
  t->add_option("--lr", trn.lr, "peak learning rate");
  t->add_option("--weight-decay", trn.weight_decay, "decoupled weight decay");
  t->add_option("--posed-fraction", trn.posed_fraction,
                "fraction of targets with usable poses");
  t->add_option("--seed", trn.seed, "training seed");
  t->callback([&] { cmd_train(trn); });

  RenderOpts ren;
  auto* r = app.add_subcommand("render", "render novel views of a scene");
  r->add_option("--checkpoint", ren.checkpoint, "checkpoint directory");
  r->add_option("--scene", ren.scene, "scene directory");
  r->add_option("--out", ren.out, "frame output directory");
  r->add_option("--orbit", ren.orbit, "render N poses on a circle");
  r->add_option("--poses", ren.pose_file, "JSON pose file");
  r->add_option("--render-size", ren.render_size,
                "output resolution (0 = training size)");
  r->callback([&] { cmd_render(ren); });

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM over a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint directory");
  e->add_option("--data", ev.data, "dataset directory");
  e->add_option("--out", ev.out, "CSV path (default stdout)");
  e->add_option("--max-scenes", ev.max_scenes, "cap on evaluated scenes");
  e->callback([&] { cmd_eval(ev); });

  BenchOpts ben;
  auto* b = app.add_subcommand("bench", "decoder/scene timing report");
  b->add_option("--preset", ben.preset, "desk | big");
  b->add_option("--trials", ben.trials, "timed trials per row");
  b->add_option("--budget-mb", ben.budget_mb,
                "transient allocation cap (0 = unlimited)");
  b->add_option("--seed", ben.seed, "model init seed");
  b->add_option("--resolutions", ben.resolutions, "decode resolutions")
      ->delimiter(',');
  b->add_option("--inputs", ben.inputs, "scene-encode input counts")
      ->delimiter(',');
  b->add_option("--out", ben.out, "CSV path (default stdout)");
  b->callback([&] { cmd_bench(ben); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
