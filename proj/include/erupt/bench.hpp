// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "erupt/model.hpp"

namespace erupt {

// Times scene encoding and the two decoder paths on a fixed model and
// reports robust percentiles plus an allocator-based peak-memory estimate.
// Absolute milliseconds are machine-dependent; downstream checks assert
// ratios and orderings only.

enum class DecoderKind { kPatch, kPixel };

inline const char* decoder_kind_name(DecoderKind k) {
  return k == DecoderKind::kPatch ? "patch" : "pixel";
}

struct BenchRow {
  std::string op;       // "decode" or "scene"
  std::string decoder;  // "patch" / "pixel"; empty for scene rows
  int resolution = 0;
  int n_inputs = 0;
  std::int64_t queries = 0;   // decoder queries per rendered image
  double scene_encode_ms = 0; // median encode time observed in this run
  double median_ms = 0;       // decode rows: per-image decode
  double p10_ms = 0;
  double p90_ms = 0;
  double fwd_ms = 0;      // scene rows: forward only
  double fwd_bwd_ms = 0;  // scene rows: forward + backward
  double fps = 0;         // 1000 / median_ms
  std::int64_t peak_bytes = 0;  // transient high-water mark above baseline
  std::string outcome = "ok";   // "ok" or "oom"
};

struct BenchReport {
  std::vector<BenchRow> rows;

  static const char* csv_header() {
    return "op,decoder,resolution,n_inputs,queries,scene_encode_ms,median_ms,"
           "p10_ms,p90_ms,fwd_ms,fwd_bwd_ms,fps,peak_bytes,outcome";
  }

  void write_csv(std::ostream& os,
                 const std::vector<std::string>& preamble = {}) const {
    for (const auto& line : preamble) os << "# " << line << "\n";
    os << csv_header() << "\n";
    for (const auto& r : rows)
      os << r.op << ',' << r.decoder << ',' << r.resolution << ','
         << r.n_inputs << ',' << r.queries << ',' << r.scene_encode_ms << ','
         << r.median_ms << ',' << r.p10_ms << ',' << r.p90_ms << ','
         << r.fwd_ms << ',' << r.fwd_bwd_ms << ',' << r.fps << ','
         << r.peak_bytes << ',' << r.outcome << "\n";
  }
};

namespace detail {

// Nearest-rank percentile on a copy; q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::lround(q * double(v.size() - 1)));
  return v[idx];
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// Restores an unlimited allocation budget on scope exit.
struct BudgetGuard {
  explicit BudgetGuard(std::int64_t bytes) {
    if (bytes > 0) AllocStats::set_budget(bytes);
  }
  ~BudgetGuard() { AllocStats::set_budget(0); }
  BudgetGuard(const BudgetGuard&) = delete;
  BudgetGuard& operator=(const BudgetGuard&) = delete;
};

template <class T>
std::vector<Array<T>> bench_images(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Array<T>> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Array<T> img({size * size, 3});
    for (std::int64_t j = 0; j < img.size(); ++j)
      img[j] = static_cast<T>(rng.uniform());
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace detail

// Renders one image per trial from a fresh inference graph (tape disabled)
// and reports per-image decode percentiles. The first trial is a warmup and
// is excluded. A positive `budget_bytes` caps live tensor bytes during the
// decode phase; exceeding it yields an "oom" row instead of a crash.
template <class T>
BenchRow bench_decode(Model<T>& model, int resolution, DecoderKind kind,
                      int trials, std::int64_t budget_bytes = 0) {
  if (trials < 1) throw ValueError("bench_decode: trials must be >= 1");
  const ModelConfig& cfg = model.config();
  const int n_inputs = 2;
  const auto images =
      detail::bench_images<T>(n_inputs, cfg.image_size, 0x13e7);

  BenchRow row;
  row.op = "decode";
  row.decoder = decoder_kind_name(kind);
  row.resolution = resolution;
  row.n_inputs = n_inputs;
  row.queries =
      kind == DecoderKind::kPatch
          ? std::int64_t(patch_query_count(resolution, resolution,
                                           kDecoderPatch))
          : std::int64_t(resolution) * resolution;

  const RelativePose front{};  // identity view for gt-only conditioning
  std::vector<double> enc_ms, dec_ms;
  for (int t = 0; t < trials + 1; ++t) {
    Graph<T> g;
    g.set_recording(false);
    std::vector<Tensor<T>> ims;
    for (const auto& a : images) ims.push_back(g.constant(a.clone()));

    auto t0 = std::chrono::steady_clock::now();
    SceneEncoding<T> enc = model.encode_scene(g, ims, n_inputs);
    const double t_enc = detail::ms_since(t0);

    Tensor<T> cond =
        model.conditioning(g, TargetMode::kGtOnly, nullptr, &front, 1.0);
    AllocStats::reset_peak();
    const std::int64_t base = AllocStats::current();
    detail::BudgetGuard guard(budget_bytes > 0 ? base + budget_bytes : 0);
    try {
      t0 = std::chrono::steady_clock::now();
      if (kind == DecoderKind::kPatch)
        model.decode_image(g, enc, cond, resolution);
      else
        model.decode_pixels(g, enc, cond, resolution);
      const double t_dec = detail::ms_since(t0);
      if (t > 0) {  // warmup excluded
        enc_ms.push_back(t_enc);
        dec_ms.push_back(t_dec);
      }
    } catch (const AllocBudgetError&) {
      row.outcome = "oom";
      return row;
    }
    row.peak_bytes = std::max(row.peak_bytes, AllocStats::peak() - base);
  }

  row.scene_encode_ms = detail::percentile(enc_ms, 0.5);
  row.median_ms = detail::percentile(dec_ms, 0.5);
  row.p10_ms = detail::percentile(dec_ms, 0.1);
  row.p90_ms = detail::percentile(dec_ms, 0.9);
  row.fps = row.median_ms > 0 ? 1000.0 / row.median_ms : 0;
  return row;
}

// Times scene encoding alone: forward with the tape off, then
// forward+backward with gradients flowing to every parameter.
template <class T>
BenchRow bench_scene(Model<T>& model, int n_inputs, int trials) {
  if (trials < 1) throw ValueError("bench_scene: trials must be >= 1");
  const ModelConfig& cfg = model.config();
  const auto images =
      detail::bench_images<T>(n_inputs, cfg.image_size, 0x5ce4);

  BenchRow row;
  row.op = "scene";
  row.resolution = cfg.image_size;
  row.n_inputs = n_inputs;

  std::vector<double> fwd_ms, bwd_ms;
  for (int t = 0; t < trials + 1; ++t) {
    AllocStats::reset_peak();
    const std::int64_t base = AllocStats::current();
    {
      Graph<T> g;
      g.set_recording(false);
      std::vector<Tensor<T>> ims;
      for (const auto& a : images) ims.push_back(g.constant(a.clone()));
      auto t0 = std::chrono::steady_clock::now();
      model.encode_scene(g, ims, n_inputs);
      if (t > 0) fwd_ms.push_back(detail::ms_since(t0));
    }
    {
      Graph<T> g;
      model.params().zero_grad();
      std::vector<Tensor<T>> ims;
      for (const auto& a : images) ims.push_back(g.constant(a.clone()));
      auto t0 = std::chrono::steady_clock::now();
      SceneEncoding<T> enc = model.encode_scene(g, ims, n_inputs);
      g.backward(sum(enc.scene_kv));
      if (t > 0) bwd_ms.push_back(detail::ms_since(t0));
    }
    row.peak_bytes = std::max(row.peak_bytes, AllocStats::peak() - base);
  }

  row.fwd_ms = detail::percentile(fwd_ms, 0.5);
  row.fwd_bwd_ms = detail::percentile(bwd_ms, 0.5);
  row.scene_encode_ms = row.fwd_ms;
  return row;
}

// The default report: both decoders at the training resolution plus one
// higher resolution, and scene encoding at increasing input counts.
template <class T>
BenchReport run_bench(Model<T>& model, int trials,
                      std::int64_t budget_bytes = 0) {
  BenchReport rep;
  const int s = model.config().image_size;
  for (int res : {s, 2 * s}) {
    rep.rows.push_back(
        bench_decode(model, res, DecoderKind::kPatch, trials, budget_bytes));
    rep.rows.push_back(
        bench_decode(model, res, DecoderKind::kPixel, trials, budget_bytes));
  }
  for (int n : {1, 2, 4})
    rep.rows.push_back(bench_scene(model, n, trials));
  return rep;
}

}  // namespace erupt
