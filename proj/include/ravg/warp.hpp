// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Motion-compensated alignment of side frames to the central frame.
// Flows are backward: flow[.,y,x] is the displacement from central-frame
// pixel (x,y) to its source location in the side frame. Flow channel 0 is dx,
// channel 1 is dy. Flows come from the renderer and are never differentiated.
#pragma once

#include <cmath>

#include "ravg/tensor.hpp"

namespace ravg {

template <class S>
struct WarpResultT {
  TensorT<S> image;     // [C,H,W]
  TensorT<S> oob_mask;  // [H,W], 1 where the flow sampled outside the image
};

// Bilinear backward warp; out-of-bounds samples return 0 and set the mask.
// Differentiable with respect to the image.
template <class S>
WarpResultT<S> backward_warp(const TensorT<S>& image, const TensorT<S>& flow) {
  require(image.rank() == 3, "backward_warp: image must be [C,H,W]");
  require(flow.rank() == 3 && flow.dim(0) == 2 && flow.dim(1) == image.dim(1) &&
              flow.dim(2) == image.dim(2),
          "backward_warp: flow must be [2,H,W] matching the image");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  WarpResultT<S> res;
  res.image = TensorT<S>::zeros({C, H, W});
  res.oob_mask = TensorT<S>::zeros({H, W});

  // Per-pixel taps: 4 source indices and bilinear weights, shared by forward
  // and backward.
  struct Tap {
    std::size_t idx[4];
    S w[4];
    bool valid;
  };
  auto taps = std::make_shared<std::vector<Tap>>(H * W);
  const S* pf = flow.data();
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t p = y * W + x;
      const double sx = static_cast<double>(x) + static_cast<double>(pf[p]);
      const double sy = static_cast<double>(y) + static_cast<double>(pf[H * W + p]);
      Tap& t = (*taps)[p];
      if (!(sx >= 0.0 && sx <= static_cast<double>(W - 1) && sy >= 0.0 &&
            sy <= static_cast<double>(H - 1))) {
        t.valid = false;
        res.oob_mask.data()[p] = S(1);
        continue;
      }
      t.valid = true;
      std::size_t x0 = static_cast<std::size_t>(sx);
      std::size_t y0 = static_cast<std::size_t>(sy);
      if (x0 >= W - 1 && W > 1) x0 = W - 2;
      if (y0 >= H - 1 && H > 1) y0 = H - 2;
      const std::size_t x1 = W > 1 ? x0 + 1 : x0;
      const std::size_t y1 = H > 1 ? y0 + 1 : y0;
      const S fx = static_cast<S>(sx - static_cast<double>(x0));
      const S fy = static_cast<S>(sy - static_cast<double>(y0));
      t.idx[0] = y0 * W + x0;
      t.idx[1] = y0 * W + x1;
      t.idx[2] = y1 * W + x0;
      t.idx[3] = y1 * W + x1;
      t.w[0] = (S(1) - fx) * (S(1) - fy);
      t.w[1] = fx * (S(1) - fy);
      t.w[2] = (S(1) - fx) * fy;
      t.w[3] = fx * fy;
    }
  }

  const S* pi = image.data();
  S* po = res.image.data();
  for (std::size_t c = 0; c < C; ++c) {
    const S* plane = pi + c * H * W;
    S* oplane = po + c * H * W;
    for (std::size_t p = 0; p < H * W; ++p) {
      const Tap& t = (*taps)[p];
      if (!t.valid) continue;
      oplane[p] = t.w[0] * plane[t.idx[0]] + t.w[1] * plane[t.idx[1]] +
                  t.w[2] * plane[t.idx[2]] + t.w[3] * plane[t.idx[3]];
    }
  }

  if (detail::track(image)) {
    res.image.set_requires_grad(true);
    auto id = image.store(), od = res.image.store();
    TapeT<S>::current().record([id, od, taps, C, H, W] {
      if (od->grad.empty()) return;
      S* gi = detail::ensure_grad(id).data();
      const S* go = od->grad.data();
      for (std::size_t c = 0; c < C; ++c) {
        S* gplane = gi + c * H * W;
        const S* goplane = go + c * H * W;
        for (std::size_t p = 0; p < H * W; ++p) {
          const Tap& t = (*taps)[p];
          if (!t.valid) continue;
          for (int k = 0; k < 4; ++k) gplane[t.idx[k]] += t.w[k] * goplane[p];
        }
      }
    });
  }
  return res;
}

// Per-pixel warp confidence from warped AOV agreement:
//   c = exp(-|A'-A0|_1 / (3*sigma_a)) * exp(-(1 - <N',N0>) / sigma_n)
// forced to 0 where the warp sampled out of bounds, clamped to [0,1].
template <class S>
TensorT<S> warp_confidence(const TensorT<S>& warped_albedo,
                           const TensorT<S>& warped_normal,
                           const TensorT<S>& center_albedo,
                           const TensorT<S>& center_normal,
                           const TensorT<S>& oob_mask, double sigma_a = 0.1,
                           double sigma_n = 0.2) {
  require(warped_albedo.rank() == 3 && warped_albedo.dim(0) == 3,
          "warp_confidence: buffers must be [3,H,W]");
  detail::require_same_shape(warped_albedo, center_albedo, "warp_confidence");
  detail::require_same_shape(warped_normal, center_normal, "warp_confidence");
  const std::size_t H = warped_albedo.dim(1), W = warped_albedo.dim(2);
  require(oob_mask.shape() == Shape{H, W}, "warp_confidence: bad oob mask shape");
  TensorT<S> conf = TensorT<S>::zeros({H, W});
  const S* wa = warped_albedo.data();
  const S* wn = warped_normal.data();
  const S* ca = center_albedo.data();
  const S* cn = center_normal.data();
  const S* ob = oob_mask.data();
  S* pc = conf.data();
  const std::size_t hw = H * W;
  for (std::size_t p = 0; p < hw; ++p) {
    if (ob[p] != S(0)) continue;  // confidence 0 out of bounds
    double l1 = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      l1 += std::abs(static_cast<double>(wa[c * hw + p]) - ca[c * hw + p]);
      dot += static_cast<double>(wn[c * hw + p]) * cn[c * hw + p];
    }
    double v = std::exp(-l1 / (3.0 * sigma_a)) * std::exp(-(1.0 - dot) / sigma_n);
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    pc[p] = static_cast<S>(v);
  }
  return conf;
}

// out = c*warped + (1-c)*center, broadcast over channels.
template <class S>
TensorT<S> confidence_mix(const TensorT<S>& warped, const TensorT<S>& center,
                          const TensorT<S>& conf) {
  detail::require_same_shape(warped, center, "confidence_mix");
  require(warped.rank() == 3, "confidence_mix: images must be [C,H,W]");
  require(conf.shape() == Shape{warped.dim(1), warped.dim(2)},
          "confidence_mix: confidence must be [H,W]");
  const std::size_t C = warped.dim(0);
  std::vector<TensorT<S>> lifted(C, conf);
  TensorT<S> cmap = stack(lifted);  // [C,H,W]
  return add(mul(cmap, warped), mul(sub(1.0, cmap), center));
}

}  // namespace ravg
