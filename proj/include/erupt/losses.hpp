// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "erupt/model.hpp"

namespace erupt {

struct LossWeights {
  double camera = 1.0 / 20.0;
  double token = 1.0 / 5.0;
};

// Mean squared error over all pixels and channels, images in [0, 1].
template <class T>
Tensor<T> image_l2(Tensor<T> pred, Tensor<T> gt) {
  if (pred.shape() != gt.shape())
    throw shape_mismatch("image_l2", pred.shape(), gt.shape());
  Tensor<T> d = sub(pred, gt);
  return mean(mul(d, d));
}

// Camera supervision for one camera: mean (1 - cos angle) over the three
// predicted basis vectors plus 1/20 of the squared position error.
template <class T>
Tensor<T> camera_loss(Graph<T>& g, const PosePrediction<T>& pred,
                      const RelativePose& gt) {
  for (const Vec3* v : {&gt.right, &gt.up, &gt.forward})
    if (std::abs(norm(*v) - 1.0) > 1e-6)
      throw ValueError("camera_loss: ground-truth basis rows must be unit "
                       "length (got norm " + std::to_string(norm(*v)) + ")");
  Array<T> gb({3, 3});
  const std::vector<double> comp = pose_components(gt);
  for (int i = 0; i < 9; ++i) gb[i] = static_cast<T>(comp[size_t(3 + i)]);
  Array<T> gp({1, 3});
  for (int i = 0; i < 3; ++i) gp[i] = static_cast<T>(comp[size_t(i)]);

  Tensor<T> cosines = row_sum(mul(pred.basis, g.constant(std::move(gb))));
  Tensor<T> rot = mean(add_scalar(mul_scalar(cosines, T(-1)), T(1)));
  Tensor<T> d = sub(pred.position, g.constant(std::move(gp)));
  return add(rot, mul_scalar(sum(mul(d, d)), T(1) / T(20)));
}

// Average camera loss over a set of supervised cameras.
template <class T>
Tensor<T> camera_loss_mean(Graph<T>& g,
                           const std::vector<PosePrediction<T>>& preds,
                           const std::vector<RelativePose>& gts) {
  if (preds.empty() || preds.size() != gts.size())
    throw ValueError("camera_loss_mean: need matching non-empty pose lists");
  Tensor<T> acc = camera_loss(g, preds[0], gts[0]);
  for (std::size_t i = 1; i < preds.size(); ++i)
    acc = add(acc, camera_loss(g, preds[i], gts[i]));
  return mul_scalar(acc, T(1) / static_cast<T>(preds.size()));
}

// Angular-margin contrastive alignment of predicted tokens with teacher
// tokens: row i of pred should match row i of teacher against all other rows.
template <class T>
Tensor<T> token_contrastive(Tensor<T> pred, Tensor<T> teacher,
                            T scale = T(20), T margin = T(0.5)) {
  if (pred.shape() != teacher.shape())
    throw shape_mismatch("token_contrastive", pred.shape(), teacher.shape());
  if (pred.rows() < 2)
    throw ValueError("token_contrastive: needs at least 2 rows, got " +
                     std::to_string(pred.rows()));
  Tensor<T> sim =
      matmul(normalize_rows(pred), normalize_rows(teacher), false, true);
  Tensor<T> pos = take_diag(sim);                       // [N, 1]
  Tensor<T> num = exp_op(mul_scalar(arc_margin(pos, margin), scale));
  Tensor<T> row = row_sum(exp_op(mul_scalar(sim, scale)));
  // Denominator keeps the margined positive and all negatives (j != i).
  Tensor<T> denom = sub(add(num, row), exp_op(mul_scalar(pos, scale)));
  return mean(sub(log_op(denom), log_op(num)));
}

template <class T>
struct LossBreakdown {
  Tensor<T> image;
  Tensor<T> camera;  // may be unset when no camera is supervised
  Tensor<T> token;   // may be unset when the token decoder is off
  Tensor<T> total;
  bool camera_in_total = false;
};

// Weighted objective. With sparse pose supervision the camera term is
// excluded from the total but still reported for monitoring.
template <class T>
LossBreakdown<T> total_loss(Tensor<T> image, Tensor<T> camera,
                            Tensor<T> token, bool include_camera,
                            const LossWeights& w = {}) {
  LossBreakdown<T> out;
  out.image = image;
  out.camera = camera;
  out.token = token;
  out.total = image;
  if (camera.defined() && include_camera) {
    out.total = add(out.total, mul_scalar(camera, static_cast<T>(w.camera)));
    out.camera_in_total = true;
  }
  if (token.defined())
    out.total = add(out.total, mul_scalar(token, static_cast<T>(w.token)));
  return out;
}

}  // namespace erupt
