// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erupt/geometry.hpp"
#include "erupt/nn.hpp"

namespace erupt {

inline constexpr int kDecoderPatch = 8;  // pixels per query side; 3 2x stages

struct ModelConfig {
  int d = 128;              // scene token width
  int heads = 4;
  int image_size = 48;
  int patch = 8;            // extractor patch side
  int extractor_blocks = 2;
  int scene_blocks = 6;
  double mlp_ratio = 2.0;
  bool freeze_extractor = false;  // random frozen patch projection, no refinement

  int decoder_d = 128;
  int decoder_heads = 4;
  int decoder_blocks = 4;
  double decoder_mlp_ratio = 2.0;

  int pose_freqs = kPoseFrequencies;

  int grid() const { return image_size / patch; }
  int tokens_per_image() const { return grid() * grid() + 1; }  // + camera
  int grid_tokens() const { return grid() * grid(); }
  int query_grid() const { return image_size / kDecoderPatch; }
  int n_queries() const { return query_grid() * query_grid(); }
  int cond_dim() const {
    return kLatentPoseDim + pose_encoding_dim(pose_freqs);
  }
  int mlp_hidden() const { return static_cast<int>(mlp_ratio * d); }
  int decoder_mlp_hidden() const {
    return static_cast<int>(decoder_mlp_ratio * decoder_d);
  }

  void validate() const {
    if (d <= 0 || d % heads != 0)
      throw ValueError("config: d must be a positive multiple of heads");
    if (d % 4 != 0) throw ValueError("config: d must be divisible by 4");
    if (image_size <= 0 || patch <= 0 || image_size % patch != 0)
      throw ValueError("config: image_size must be divisible by patch");
    if (image_size % kDecoderPatch != 0)
      throw ValueError("config: image_size must be divisible by 8");
    if (decoder_d % 8 != 0)
      throw ValueError("config: decoder_d must be divisible by 8");
    if (decoder_d % decoder_heads != 0)
      throw ValueError("config: decoder_d must be a multiple of decoder_heads");
    if (scene_blocks < 1 || decoder_blocks < 1)
      throw ValueError("config: need at least one block");
    if (pose_freqs < 1) throw ValueError("config: pose_freqs must be >= 1");
  }

  // Desk-scale preset: trains on one CPU core.
  static ModelConfig desk() { return ModelConfig{}; }

  // Reference-scale preset used only for parameter accounting.
  static ModelConfig big() {
    ModelConfig c;
    c.d = 768;
    c.heads = 12;
    c.image_size = 224;
    c.patch = 14;
    c.mlp_ratio = 4.0;
    c.decoder_d = 400;
    c.decoder_heads = 8;
    c.decoder_mlp_ratio = 4.0;
    return c;
  }
};

// How a target render is conditioned on the desired viewpoint.
enum class TargetMode { kLatentOnly = 0, kGtOnly = 1, kBoth = 2 };

inline const char* mode_name(TargetMode m) {
  switch (m) {
    case TargetMode::kLatentOnly: return "latent_only";
    case TargetMode::kGtOnly: return "gt_only";
    case TargetMode::kBoth: return "both";
  }
  return "?";
}

struct ModelStats {
  std::int64_t scene_transforms = 0;
  std::int64_t decode_image_calls = 0;
  std::int64_t decode_token_calls = 0;
  std::int64_t decode_pixel_calls = 0;
  std::int64_t queries_decoded = 0;    // image-decoder query rows
  std::int64_t last_render_queries = 0;
};

template <class T>
struct SceneEncoding {
  Tensor<T> scene_kv;                    // [n_inputs * g^2, d]
  std::vector<Tensor<T>> camera_tokens;  // one [1, d] per encoded image
  std::vector<Tensor<T>> extractor_grid; // raw extractor tokens per image
  int n_inputs = 0;
};

template <class T>
struct PosePrediction {
  Tensor<T> position;  // [1, 3]
  Tensor<T> basis;     // [3, 3], rows unit length
  Tensor<T> latent;    // [1, kLatentPoseDim]
};

namespace detail {

// Cross-attention sub-block with its own query/key-value norms.
template <class T>
struct CrossBlock {
  LayerNormLayer<T> ln_q, ln_kv;
  MultiHeadAttention<T> attn;

  CrossBlock() = default;
  CrossBlock(ParamStore<T>& ps, const std::string& prefix, int d, int heads)
      : ln_q(ps, prefix + ".lnq", d),
        ln_kv(ps, prefix + ".lnk", d),
        attn(ps, prefix + ".ca", d, heads) {}

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x, Tensor<T> kv) const {
    return attn(g, ln_q(g, x), ln_kv(g, kv), RowRanges::whole(x.rows()));
  }
};

template <class T>
struct SceneBlock {
  LayerNormLayer<T> ln1, ln3;
  GroupedSelfAttention<T> sa;
  CrossBlock<T> cross;
  Mlp<T> mlp;

  SceneBlock() = default;
  SceneBlock(ParamStore<T>& ps, const std::string& prefix, int d, int heads,
             int mlp_hidden)
      : ln1(ps, prefix + ".ln1", d),
        ln3(ps, prefix + ".ln3", d),
        sa(ps, prefix + ".sa", d, heads),
        cross(ps, prefix, d, heads),
        mlp(ps, prefix + ".mlp", d, mlp_hidden) {}
};

// Decoder block: query self-attention, cross-attention into the scene, MLP.
template <class T>
struct DecoderBlock {
  LayerNormLayer<T> ln1, ln3;
  GroupedSelfAttention<T> sa;
  CrossBlock<T> cross;
  Mlp<T> mlp;
  bool with_sa = true;

  DecoderBlock() = default;
  DecoderBlock(ParamStore<T>& ps, const std::string& prefix, int d, int heads,
               int mlp_hidden, bool self_attention)
      : ln3(ps, prefix + ".ln3", d),
        cross(ps, prefix, d, heads),
        mlp(ps, prefix + ".mlp", d, mlp_hidden),
        with_sa(self_attention) {
    if (self_attention) {
      ln1 = LayerNormLayer<T>(ps, prefix + ".ln1", d);
      sa = GroupedSelfAttention<T>(ps, prefix + ".sa", d, heads);
    }
  }

  Tensor<T> operator()(Graph<T>& g, Tensor<T> x, Tensor<T> kv,
                       const RowRanges& groups) const {
    if (with_sa) x = add(x, sa(g, ln1(g, x), groups));
    x = add(x, cross(g, x, kv));
    x = add(x, mlp(g, ln3(g, x)));
    return x;
  }
};

}  // namespace detail

// Latent-scene view synthesis model: per-image extractor, joint scene
// transformer with camera tokens, pose head, and query-based decoders.
template <class T>
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed)
      : cfg_(cfg), ps_(fold_seed(seed, {0x30de1})) {
    cfg_.validate();
    build();
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return ps_; }
  const ParamStore<T>& params() const { return ps_; }
  ModelStats& stats() { return stats_; }

  // ---- extractor -----------------------------------------------------------

  // Raw backbone tokens for one image: [g^2, d]. The image enters as graph
  // rows [S^2, 3] so pixel gradients stay traceable.
  Tensor<T> extract_image(Graph<T>& g, Tensor<T> image_rows) const {
    const int s = cfg_.image_size;
    if (image_rows.rows() != s * s || image_rows.cols() != 3)
      throw ShapeError("extract_image: expected [" + std::to_string(s * s) +
                       ",3], got " + shape_str(image_rows.shape()));
    Tensor<T> x = patchify(image_rows, s, s, cfg_.patch);
    if (cfg_.freeze_extractor) {
      Linear<T> frozen = embed_;
      frozen.frozen = true;
      return frozen(g, x);
    }
    x = embed_(g, x);
    const RowRanges one = RowRanges::whole(cfg_.grid_tokens());
    for (const auto& b : ext_blocks_) x = b(g, x, one);
    return ext_ln_(g, x);
  }

  // ---- scene transformer ---------------------------------------------------

  // images[0..n_inputs) are inputs whose tokens form the scene; the rest are
  // targets encoded only so their camera token can carry a pose estimate.
  SceneEncoding<T> encode_scene(Graph<T>& g,
                                const std::vector<Tensor<T>>& images,
                                int n_inputs) {
    const int n_img = static_cast<int>(images.size());
    if (n_inputs < 1 || n_inputs > n_img)
      throw ValueError("encode_scene: need 1 <= n_inputs <= images");
    const int gt = cfg_.grid_tokens(), tpi = cfg_.tokens_per_image();

    SceneEncoding<T> enc;
    enc.n_inputs = n_inputs;
    std::vector<Tensor<T>> assembled;
    assembled.reserve(static_cast<std::size_t>(n_img));
    for (int i = 0; i < n_img; ++i) {
      Tensor<T> grid = extract_image(g, images[i]);
      enc.extractor_grid.push_back(grid);
      Tensor<T> x = add(grid, ps_.use(g, "scene.pos"));
      x = concat(x, ps_.use(g, "scene.camera"), 0);
      if (i == 0) x = add_rowvec(x, ps_.use(g, "scene.ref"));
      assembled.push_back(x);
    }
    Tensor<T> x = n_img == 1 ? assembled[0] : concat(assembled, 0);

    RowRanges per_image;
    for (int i = 0; i < n_img; ++i)
      per_image.r.push_back({i * tpi, (i + 1) * tpi});

    for (const auto& blk : scene_blocks_) {
      x = add(x, blk.sa(g, blk.ln1(g, x), per_image));
      Tensor<T> kv = input_grid_rows(g, x, n_inputs);
      x = add(x, blk.cross(g, x, kv));
      x = add(x, blk.mlp(g, blk.ln3(g, x)));
    }
    x = scene_ln_(g, x);

    enc.scene_kv = input_grid_rows(g, x, n_inputs);
    for (int i = 0; i < n_img; ++i)
      enc.camera_tokens.push_back(
          slice_rows(x, i * tpi + gt, i * tpi + gt + 1));
    ++stats_.scene_transforms;
    return enc;
  }

  // ---- pose head -----------------------------------------------------------

  PosePrediction<T> estimate_pose(Graph<T>& g, Tensor<T> camera_token) const {
    PosePrediction<T> p;
    p.position = pose_pos_(g, camera_token);
    p.basis = normalize_rows(reshape(pose_basis_(g, camera_token), {3, 3}));
    p.latent = pose_latent_(g, camera_token);
    return p;
  }

  // Pose values only (for evaluation); rows renormalized copies.
  RelativePose predicted_pose_value(const PosePrediction<T>& p) const {
    const Array<T>& b = p.basis.value();
    const Array<T>& t = p.position.value();
    RelativePose r;
    r.position = {double(t[0]), double(t[1]), double(t[2])};
    r.right = {double(b[0]), double(b[1]), double(b[2])};
    r.up = {double(b[3]), double(b[4]), double(b[5])};
    r.forward = {double(b[6]), double(b[7]), double(b[8])};
    return r;
  }

  // ---- target conditioning -------------------------------------------------

  // One conditioning row [1, 8 + 24F]: estimated latent pose next to the
  // sine-encoded true relative pose, either half zeroed by mode.
  Tensor<T> conditioning(Graph<T>& g, TargetMode mode,
                         const PosePrediction<T>* latent_src,
                         const RelativePose* gt_rel, double pose_scale) const {
    const int enc_dim = pose_encoding_dim(cfg_.pose_freqs);
    Tensor<T> latent_part, gt_part;
    if (mode == TargetMode::kGtOnly || latent_src == nullptr) {
      latent_part = g.constant(Array<T>({1, kLatentPoseDim}, T(0)));
    } else {
      latent_part = latent_src->latent;
    }
    if (mode == TargetMode::kLatentOnly) {
      gt_part = g.constant(Array<T>({1, enc_dim}, T(0)));
    } else {
      if (gt_rel == nullptr)
        throw ValueError("conditioning: mode needs a true pose but none given");
      const std::vector<double> e =
          sine_encode(*gt_rel, cfg_.pose_freqs, pose_scale);
      Array<T> a({1, enc_dim});
      for (int i = 0; i < enc_dim; ++i) a[i] = static_cast<T>(e[i]);
      gt_part = g.constant(std::move(a));
    }
    return concat(latent_part, gt_part, 1);
  }

  // ---- image decoder -------------------------------------------------------

  // Decodes one image per conditioning row set, batched through the shared
  // transformer trunk. render_size 0 means the training resolution.
  std::vector<Tensor<T>> decode_images(Graph<T>& g,
                                       const SceneEncoding<T>& enc,
                                       const std::vector<Tensor<T>>& conds,
                                       int render_size = 0) {
    const int r = render_size == 0 ? cfg_.image_size : render_size;
    if (r % kDecoderPatch != 0)
      throw ValueError("decode_images: render size must be divisible by 8");
    const int qg = r / kDecoderPatch, nq = qg * qg;
    const int n_t = static_cast<int>(conds.size());
    if (n_t == 0) throw ValueError("decode_images: no conditioning given");

    Tensor<T> queries =
        r == cfg_.image_size
            ? ps_.use(g, "dec.queries")
            : g.constant(patch_ray_grid<T>(r, r, kDecoderPatch, cfg_.decoder_d));

    std::vector<Tensor<T>> streams;
    streams.reserve(static_cast<std::size_t>(n_t));
    for (const auto& cond : conds)
      streams.push_back(concat(queries, tile_rows(cond, nq), 1));
    Tensor<T> x = n_t == 1 ? streams[0] : concat(streams, 0);
    x = dec_in_(g, x);

    RowRanges per_target;
    for (int t = 0; t < n_t; ++t)
      per_target.r.push_back({t * nq, (t + 1) * nq});
    Tensor<T> kv = dec_kv_(g, enc.scene_kv);
    for (const auto& blk : dec_blocks_) x = blk(g, x, kv, per_target);
    x = dec_ln_(g, x);

    std::vector<Tensor<T>> images;
    images.reserve(static_cast<std::size_t>(n_t));
    for (int t = 0; t < n_t; ++t) {
      Tensor<T> m = n_t == 1 ? x : slice_rows(x, t * nq, (t + 1) * nq);
      images.push_back(to_rgb(g, m, qg));
    }
    stats_.decode_image_calls += n_t;
    stats_.queries_decoded += std::int64_t(n_t) * nq;
    stats_.last_render_queries = nq;
    return images;
  }

  Tensor<T> decode_image(Graph<T>& g, const SceneEncoding<T>& enc,
                         Tensor<T> cond, int render_size = 0) {
    return decode_images(g, enc, {cond}, render_size)[0];
  }

  // ---- token decoder -------------------------------------------------------

  // Predicts the extractor's grid tokens for the conditioned viewpoint.
  Tensor<T> decode_tokens(Graph<T>& g, const SceneEncoding<T>& enc,
                          Tensor<T> cond) {
    const int nq = cfg_.grid_tokens();
    Tensor<T> x = concat(ps_.use(g, "tok.queries"), tile_rows(cond, nq), 1);
    x = tok_in_(g, x);
    Tensor<T> kv = tok_kv_(g, enc.scene_kv);
    const RowRanges one = RowRanges::whole(nq);
    for (const auto& blk : tok_blocks_) x = blk(g, x, kv, one);
    x = tok_out_(g, tok_ln_(g, x));
    ++stats_.decode_token_calls;
    return x;
  }

  // ---- per-pixel ray decoder (benchmark baseline) --------------------------

  // One query per pixel; rays decode independently (cross-attention + MLP
  // only), with a linear RGB head instead of the convolutional upsampler.
  Tensor<T> decode_pixels(Graph<T>& g, const SceneEncoding<T>& enc,
                          Tensor<T> cond, int render_size = 0) {
    const int r = render_size == 0 ? cfg_.image_size : render_size;
    const int nq = r * r;
    Tensor<T> queries =
        g.constant(pos_encoding_2d<T>(r, r, cfg_.decoder_d, 1.0));
    Tensor<T> x = concat(queries, tile_rows(cond, nq), 1);
    x = pix_in_(g, x);
    Tensor<T> kv = pix_kv_(g, enc.scene_kv);
    const RowRanges one = RowRanges::whole(nq);
    for (const auto& blk : pix_blocks_) x = blk(g, x, kv, one);
    x = sigmoid(pix_out_(g, pix_ln_(g, x)));
    ++stats_.decode_pixel_calls;
    return x;
  }

  // ---- parameter accounting ------------------------------------------------

  std::int64_t scene_transformer_param_count() const {
    return ps_.scalar_count("scene.");
  }
  std::int64_t image_decoder_param_count() const {
    return ps_.scalar_count("dec.");
  }
  std::int64_t total_param_count() const { return ps_.scalar_count(); }

 private:
  void build() {
    const int d = cfg_.d, p = cfg_.patch;
    embed_ = Linear<T>(ps_, "ext.embed", p * p * 3, d);
    for (int b = 0; b < cfg_.extractor_blocks; ++b)
      ext_blocks_.emplace_back(ps_, "ext.b" + std::to_string(b), d,
                               cfg_.heads, cfg_.mlp_hidden());
    ext_ln_ = LayerNormLayer<T>(ps_, "ext.ln", d);

    ps_.create_normal("scene.pos", {cfg_.grid_tokens(), d}, 0.02);
    ps_.create_normal("scene.camera", {1, d}, 0.02);
    ps_.create_normal("scene.ref", {1, d}, 0.02);
    for (int b = 0; b < cfg_.scene_blocks; ++b)
      scene_blocks_.emplace_back(ps_, "scene.b" + std::to_string(b), d,
                                 cfg_.heads, cfg_.mlp_hidden());
    scene_ln_ = LayerNormLayer<T>(ps_, "scene.ln", d);

    pose_pos_ = Linear<T>(ps_, "pose.pos", d, 3);
    pose_basis_ = Linear<T>(ps_, "pose.basis", d, 9);
    pose_latent_ = Linear<T>(ps_, "pose.latent", d, kLatentPoseDim);

    const int dd = cfg_.decoder_d, cd = cfg_.cond_dim();
    ps_.create_from("dec.queries",
                    patch_ray_grid<T>(cfg_.image_size, cfg_.image_size,
                                      kDecoderPatch, dd));
    dec_in_ = Linear<T>(ps_, "dec.in", dd + cd, dd);
    dec_kv_ = Linear<T>(ps_, "dec.kv", d, dd);
    for (int b = 0; b < cfg_.decoder_blocks; ++b)
      dec_blocks_.emplace_back(ps_, "dec.b" + std::to_string(b), dd,
                               cfg_.decoder_heads, cfg_.decoder_mlp_hidden(),
                               /*self_attention=*/true);
    dec_ln_ = LayerNormLayer<T>(ps_, "dec.ln", dd);
    const int c1 = dd / 2, c2 = dd / 4, c3 = dd / 8;
    up_.clear();
    up_.push_back(Linear<T>(ps_, "dec.up0", 9 * dd, 4 * c1));
    up_.push_back(Linear<T>(ps_, "dec.up1", 9 * c1, 4 * c2));
    up_.push_back(Linear<T>(ps_, "dec.up2", 9 * c2, 4 * c3));
    rgb_ = Linear<T>(ps_, "dec.rgb", c3, 3);

    ps_.create_from(
        "tok.queries",
        pos_encoding_2d<T>(cfg_.grid(), cfg_.grid(), dd, double(p)));
    tok_in_ = Linear<T>(ps_, "tok.in", dd + cd, dd);
    tok_kv_ = Linear<T>(ps_, "tok.kv", d, dd);
    for (int b = 0; b < cfg_.decoder_blocks; ++b)
      tok_blocks_.emplace_back(ps_, "tok.b" + std::to_string(b), dd,
                               cfg_.decoder_heads, cfg_.decoder_mlp_hidden(),
                               /*self_attention=*/true);
    tok_ln_ = LayerNormLayer<T>(ps_, "tok.ln", dd);
    tok_out_ = Linear<T>(ps_, "tok.out", dd, d);

    pix_in_ = Linear<T>(ps_, "pix.in", dd + cd, dd);
    pix_kv_ = Linear<T>(ps_, "pix.kv", d, dd);
    for (int b = 0; b < cfg_.decoder_blocks; ++b)
      pix_blocks_.emplace_back(ps_, "pix.b" + std::to_string(b), dd,
                               cfg_.decoder_heads, cfg_.decoder_mlp_hidden(),
                               /*self_attention=*/false);
    pix_ln_ = LayerNormLayer<T>(ps_, "pix.ln", dd);
    pix_out_ = Linear<T>(ps_, "pix.out", dd, 3);
  }

  // Grid-token rows of the first n_inputs images, concatenated.
  Tensor<T> input_grid_rows(Graph<T>& g, Tensor<T> x, int n_inputs) const {
    (void)g;
    const int gt = cfg_.grid_tokens(), tpi = cfg_.tokens_per_image();
    std::vector<Tensor<T>> parts;
    parts.reserve(static_cast<std::size_t>(n_inputs));
    for (int i = 0; i < n_inputs; ++i)
      parts.push_back(slice_rows(x, i * tpi, i * tpi + gt));
    return n_inputs == 1 ? parts[0] : concat(parts, 0);
  }

  // Query-grid feature map -> RGB rows via three conv + 2x upsample stages.
  Tensor<T> to_rgb(Graph<T>& g, Tensor<T> m, int qg) {
    int h = qg;
    for (const auto& conv : up_) {
      m = conv2d(m, ps_.use(g, conv.w), h, h, 3);
      m = add_rowvec(m, ps_.use(g, conv.b));
      m = depth_to_space(m, h, h);
      m = gelu(m);
      h *= 2;
    }
    m = conv2d(m, ps_.use(g, rgb_.w), h, h, 1);
    m = add_rowvec(m, ps_.use(g, rgb_.b));
    return sigmoid(m);
  }

  ModelConfig cfg_;
  ParamStore<T> ps_;
  ModelStats stats_;

  Linear<T> embed_;
  std::vector<TransformerBlock<T>> ext_blocks_;
  LayerNormLayer<T> ext_ln_;

  std::vector<detail::SceneBlock<T>> scene_blocks_;
  LayerNormLayer<T> scene_ln_;

  Linear<T> pose_pos_, pose_basis_, pose_latent_;

  Linear<T> dec_in_, dec_kv_;
  std::vector<detail::DecoderBlock<T>> dec_blocks_;
  LayerNormLayer<T> dec_ln_;
  std::vector<Linear<T>> up_;
  Linear<T> rgb_;

  Linear<T> tok_in_, tok_kv_, tok_out_;
  std::vector<detail::DecoderBlock<T>> tok_blocks_;
  LayerNormLayer<T> tok_ln_;

  Linear<T> pix_in_, pix_kv_, pix_out_;
  std::vector<detail::DecoderBlock<T>> pix_blocks_;
  LayerNormLayer<T> pix_ln_;
};

}  // namespace erupt
