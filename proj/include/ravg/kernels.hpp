// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Kernel-predictive output head: per-pixel spatio-temporal kernels of shape
// [T,Kh,Kw] stored as a [K,H,W] tensor with K = T*Kh*Kw, channel layout
// tau-major, then dy, then dx. Checkpoints rely on this layout.
#pragma once

#include <set>
#include <vector>

#include "ravg/tensor.hpp"
#include "ravg/thread_pool.hpp"

namespace ravg {

template <class S>
struct KernelFieldT {
  TensorT<S> weights;  // [K, H, W]
  int frames = 0;      // T
  int kh = 0, kw = 0;
  bool normalized = false;
  TensorT<S> fallback;  // [H,W]; 1 where a constant fallback kernel was emitted

  std::size_t taps() const {
    return static_cast<std::size_t>(frames) * kh * kw;
  }
  std::size_t height() const { return weights.dim(1); }
  std::size_t width() const { return weights.dim(2); }
  // Channel of the central frame's central tap (the identity kernel).
  std::size_t center_channel() const {
    const std::size_t t = static_cast<std::size_t>(frames) / 2;
    return (t * kh + kh / 2) * kw + kw / 2;
  }

  static KernelFieldT raw(TensorT<S> weights, int frames, int kh, int kw) {
    require(weights.rank() == 3, "kernel field weights must be [K,H,W]");
    require(weights.dim(0) == static_cast<std::size_t>(frames) * kh * kw,
            "kernel field channel count does not match T*Kh*Kw");
    require(frames % 2 == 1 && kh % 2 == 1 && kw % 2 == 1,
            "kernel field dims must be odd");
    KernelFieldT f;
    f.weights = std::move(weights);
    f.frames = frames;
    f.kh = kh;
    f.kw = kw;
    f.fallback = TensorT<S>::zeros({f.weights.dim(1), f.weights.dim(2)});
    return f;
  }
};

// Thresholded-ReLU normalization: eta_t(w_i) = max(0,w_i-t)/sum_j max(0,w_j-t)
// per pixel. Pixels where every weight is <= t receive the identity kernel
// and are flagged; those pixels are constants for the backward pass.
// Requires t < 1/K so equal-weight kernels are never zeroed out.
template <class S>
KernelFieldT<S> threshold_normalize(const KernelFieldT<S>& raw, double t) {
  const std::size_t K = raw.taps();
  if (!(t < 1.0 / static_cast<double>(K)))
    throw ConfigError("kernel threshold must satisfy t < 1/K (K=" +
                      std::to_string(K) + ", t=" + std::to_string(t) + ")");
  const std::size_t H = raw.height(), W = raw.width(), HW = H * W;
  KernelFieldT<S> out = KernelFieldT<S>::raw(TensorT<S>::zeros(raw.weights.shape()),
                                             raw.frames, raw.kh, raw.kw);
  const std::size_t center = raw.center_channel();
  const S st = static_cast<S>(t);
  const S* pw = raw.weights.data();
  S* po = out.weights.data();
  S* pf = out.fallback.data();
  auto inv_sum = std::make_shared<std::vector<S>>(HW, S(0));
  parallel_chunks(HW, 1024, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      S s = S(0);
      for (std::size_t i = 0; i < K; ++i) {
        const S m = pw[i * HW + p] - st;
        if (m > S(0)) s += m;
      }
      if (s > S(0)) {
        (*inv_sum)[p] = S(1) / s;
        for (std::size_t i = 0; i < K; ++i) {
          const S m = pw[i * HW + p] - st;
          po[i * HW + p] = m > S(0) ? m / s : S(0);
        }
      } else {
        po[center * HW + p] = S(1);
        pf[p] = S(1);
      }
    }
  });
  out.normalized = true;
  if (detail::track(raw.weights)) {
    out.weights.set_requires_grad(true);
    auto rd = raw.weights.store(), od = out.weights.store();
    TapeT<S>::current().record([rd, od, inv_sum, K, HW, st] {
      if (od->grad.empty()) return;
      S* gr = detail::ensure_grad(rd).data();
      const S* go = od->grad.data();
      const S* ov = od->value.data();
      const S* rv = rd->value.data();
      parallel_chunks(HW, 1024, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
          const S inv = (*inv_sum)[p];
          if (inv == S(0)) continue;  // fallback pixel: constant
          S dot = S(0);
          for (std::size_t i = 0; i < K; ++i) dot += go[i * HW + p] * ov[i * HW + p];
          for (std::size_t i = 0; i < K; ++i) {
            if (rv[i * HW + p] > st) gr[i * HW + p] += (go[i * HW + p] - dot) * inv;
          }
        }
      });
    });
  }
  return out;
}

// Softmax baseline (Eq. of the plain normalized weights): strictly positive.
template <class S>
KernelFieldT<S> softmax_normalize(const KernelFieldT<S>& raw) {
  KernelFieldT<S> out = KernelFieldT<S>::raw(softmax(raw.weights, 0), raw.frames,
                                             raw.kh, raw.kw);
  out.normalized = true;
  return out;
}

// Applies per-pixel kernels to a window of images: out[c,y,x] =
// sum_i k_i * seq[tau][c, y+dy, x+dx] / (sum of in-bounds k_i). Taps falling
// outside the image are dropped and the rest renormalized, which keeps the
// output a convex combination at the borders. Pixels whose entire in-bounds
// mass is ~0 pass the central input through as a constant.
template <class S>
TensorT<S> apply_kernels(const KernelFieldT<S>& kernels,
                         const std::vector<TensorT<S>>& seq) {
  require(kernels.normalized, "apply_kernels: kernels must be normalized");
  require(seq.size() == static_cast<std::size_t>(kernels.frames),
          "apply_kernels: sequence length does not match kernel frames");
  const std::size_t H = kernels.height(), W = kernels.width(), HW = H * W;
  const std::size_t C = seq[0].dim(0);
  for (const auto& img : seq)
    require(img.shape() == Shape{C, H, W}, "apply_kernels: image shape mismatch");
  const int T = kernels.frames, KH = kernels.kh, KW = kernels.kw;
  const int rh = KH / 2, rw = KW / 2;
  const std::size_t Tk = static_cast<std::size_t>(T);

  TensorT<S> out = TensorT<S>::zeros({C, H, W});
  std::vector<const S*> imgs(Tk);
  for (std::size_t i = 0; i < Tk; ++i) imgs[i] = seq[i].data();
  const S* kv = kernels.weights.data();
  S* po = out.data();
  auto inv_mass = std::make_shared<std::vector<S>>(HW, S(0));
  const std::size_t kcenter = kernels.center_channel();
  const std::size_t tcenter = Tk / 2;

  parallel_for(H, [&](std::size_t y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t p = y * W + x;
      S mass = S(0);
      for (int tau = 0; tau < T; ++tau)
        for (int dy = -rh; dy <= rh; ++dy) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (int dx = -rw; dx <= rw; ++dx) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
            mass += kv[((static_cast<std::size_t>(tau) * KH + (dy + rh)) * KW +
                        (dx + rw)) * HW + p];
          }
        }
      if (!(mass > S(1e-12))) {
        // Degenerate: all retained mass out of bounds; pass the center pixel.
        for (std::size_t c = 0; c < C; ++c)
          po[c * HW + p] = imgs[tcenter][c * HW + p];
        continue;
      }
      (*inv_mass)[p] = S(1) / mass;
      for (std::size_t c = 0; c < C; ++c) {
        S acc = S(0);
        for (int tau = 0; tau < T; ++tau) {
          const S* plane = imgs[static_cast<std::size_t>(tau)] + c * HW;
          for (int dy = -rh; dy <= rh; ++dy) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (int dx = -rw; dx <= rw; ++dx) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += kv[((static_cast<std::size_t>(tau) * KH + (dy + rh)) * KW +
                         (dx + rw)) * HW + p] *
                     plane[static_cast<std::size_t>(yy) * W + xx];
            }
          }
        }
        po[c * HW + p] = acc / mass;
      }
    }
  });

  bool any_img_grad = false;
  for (const auto& img : seq) any_img_grad = any_img_grad || detail::track(img);
  if (detail::track(kernels.weights) || any_img_grad) {
    out.set_requires_grad(true);
    auto kd = kernels.weights.store();
    auto od = out.store();
    std::vector<std::shared_ptr<TensorStore<S>>> img_stores;
    for (const auto& img : seq) img_stores.push_back(img.store());
    TapeT<S>::current().record([kd, od, img_stores, inv_mass, C, H, W, T, KH, KW,
                                rh, rw, kcenter] {
      (void)kcenter;
      if (od->grad.empty()) return;
      const std::size_t HW = H * W;
      const S* go = od->grad.data();
      const S* ov = od->value.data();
      const S* kv = kd->value.data();
      const bool kgrad = kd->requires_grad;
      bool igrad = false;
      for (const auto& s : img_stores) igrad = igrad || s->requires_grad;

      if (kgrad) {
        S* gk = detail::ensure_grad(kd).data();
        parallel_for(H, [&](std::size_t y) {
          for (std::size_t x = 0; x < W; ++x) {
            const std::size_t p = y * W + x;
            const S inv = (*inv_mass)[p];
            if (inv == S(0)) continue;  // degenerate pixel is constant
            for (int tau = 0; tau < T; ++tau) {
              const S* plane = img_stores[static_cast<std::size_t>(tau)]->value.data();
              for (int dy = -rh; dy <= rh; ++dy) {
                const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int dx = -rw; dx <= rw; ++dx) {
                  const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                  if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
                  const std::size_t ch =
                      ((static_cast<std::size_t>(tau) * KH + (dy + rh)) * KW +
                       (dx + rw));
                  S acc = S(0);
                  for (std::size_t c = 0; c < C; ++c) {
                    const S v = plane[c * HW + static_cast<std::size_t>(yy) * W + xx];
                    acc += go[c * HW + p] * (v - ov[c * HW + p]);
                  }
                  gk[ch * HW + p] += acc * inv;
                }
              }
            }
          }
        });
      }

      if (igrad) {
        // Scatter into overlapping input pixels; serial fixed order.
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const std::size_t p = y * W + x;
            const S inv = (*inv_mass)[p];
            if (inv == S(0)) continue;
            for (int tau = 0; tau < T; ++tau) {
              auto& st = img_stores[static_cast<std::size_t>(tau)];
              if (!st->requires_grad) continue;
              S* gi = detail::ensure_grad(st).data();
              for (int dy = -rh; dy <= rh; ++dy) {
                const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int dx = -rw; dx <= rw; ++dx) {
                  const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                  if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
                  const S kw_v =
                      kv[((static_cast<std::size_t>(tau) * KH + (dy + rh)) * KW +
                          (dx + rw)) * HW + p] * inv;
                  for (std::size_t c = 0; c < C; ++c)
                    gi[c * HW + static_cast<std::size_t>(yy) * W + xx] +=
                        kw_v * go[c * HW + p];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// Kernel reuse on an auxiliary buffer: identical arithmetic on C' channels.
template <class S>
TensorT<S> apply_to_aov(const KernelFieldT<S>& kernels,
                        const std::vector<TensorT<S>>& aov_seq) {
  require(!aov_seq.empty() && aov_seq[0].rank() == 3 &&
              aov_seq[0].dim(1) == kernels.height() &&
              aov_seq[0].dim(2) == kernels.width(),
          "apply_to_aov: aov spatial size does not match kernels");
  return apply_kernels(kernels, aov_seq);
}

// Temporal-subset construction: zero the weights of frames not in `keep` and
// renormalize the rest per pixel. Pixels whose retained mass is < 1e-8 fall
// back to uniform weights over the retained frames' central taps and are
// flagged; flagged pixels are constants for the backward pass.
template <class S>
KernelFieldT<S> mask_renormalize(const KernelFieldT<S>& kernels,
                                 const std::set<int>& keep) {
  if (keep.empty()) throw ConfigError("mask_renormalize: keep set is empty");
  require(kernels.normalized, "mask_renormalize: kernels must be normalized");
  const int T = kernels.frames;
  for (int f : keep)
    require(f >= 0 && f < T, "mask_renormalize: frame index out of range");
  if (static_cast<int>(keep.size()) == T) return kernels;  // keep-all is the identity
  const std::size_t K = kernels.taps(), HW = kernels.height() * kernels.width();
  const std::size_t taps_per_frame = static_cast<std::size_t>(kernels.kh) * kernels.kw;
  std::vector<bool> keep_ch(K, false);
  for (int f : keep)
    for (std::size_t i = 0; i < taps_per_frame; ++i)
      keep_ch[static_cast<std::size_t>(f) * taps_per_frame + i] = true;

  KernelFieldT<S> out = KernelFieldT<S>::raw(TensorT<S>::zeros(kernels.weights.shape()),
                                             kernels.frames, kernels.kh, kernels.kw);
  out.normalized = true;
  const S* pw = kernels.weights.data();
  S* po = out.weights.data();
  S* pf = out.fallback.data();
  auto inv_sum = std::make_shared<std::vector<S>>(HW, S(0));
  const std::size_t ctap = (static_cast<std::size_t>(kernels.kh) / 2) * kernels.kw +
                           kernels.kw / 2;
  parallel_chunks(HW, 1024, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      S s = S(0);
      for (std::size_t i = 0; i < K; ++i)
        if (keep_ch[i]) s += pw[i * HW + p];
      if (s >= S(1e-8)) {
        (*inv_sum)[p] = S(1) / s;
        for (std::size_t i = 0; i < K; ++i)
          if (keep_ch[i]) po[i * HW + p] = pw[i * HW + p] / s;
      } else {
        const S u = S(1) / static_cast<S>(keep.size());
        for (int f : keep)
          po[(static_cast<std::size_t>(f) * taps_per_frame + ctap) * HW + p] = u;
        pf[p] = S(1);
      }
    }
  });
  if (detail::track(kernels.weights)) {
    out.weights.set_requires_grad(true);
    auto kd = kernels.weights.store(), od = out.weights.store();
    auto keep_mask = std::make_shared<std::vector<bool>>(std::move(keep_ch));
    TapeT<S>::current().record([kd, od, inv_sum, keep_mask, K, HW] {
      if (od->grad.empty()) return;
      S* gk = detail::ensure_grad(kd).data();
      const S* go = od->grad.data();
      const S* ov = od->value.data();
      parallel_chunks(HW, 1024, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
          const S inv = (*inv_sum)[p];
          if (inv == S(0)) continue;  // fallback pixel: constant
          S dot = S(0);
          for (std::size_t i = 0; i < K; ++i)
            if ((*keep_mask)[i]) dot += go[i * HW + p] * ov[i * HW + p];
          for (std::size_t i = 0; i < K; ++i)
            if ((*keep_mask)[i]) gk[i * HW + p] += (go[i * HW + p] - dot) * inv;
        }
      });
    });
  }
  return out;
}

// Per-frame kernel mass statistics: s_tau[p] = sum of frame tau's taps at p;
// reports mean and max of s_tau over pixels.
struct FrameWeightStats {
  std::vector<double> avg;
  std::vector<double> max;
};

template <class S>
FrameWeightStats frame_weight_stats(const KernelFieldT<S>& kernels) {
  require(kernels.normalized, "frame_weight_stats: kernels must be normalized");
  const std::size_t HW = kernels.height() * kernels.width();
  const std::size_t taps_per_frame = static_cast<std::size_t>(kernels.kh) * kernels.kw;
  FrameWeightStats st;
  st.avg.resize(kernels.frames, 0.0);
  st.max.resize(kernels.frames, 0.0);
  const S* pw = kernels.weights.data();
  for (int f = 0; f < kernels.frames; ++f) {
    double acc = 0.0, mx = 0.0;
    for (std::size_t p = 0; p < HW; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < taps_per_frame; ++i)
        s += pw[(static_cast<std::size_t>(f) * taps_per_frame + i) * HW + p];
      acc += s;
      if (s > mx) mx = s;
    }
    st.avg[static_cast<std::size_t>(f)] = acc / static_cast<double>(HW);
    st.max[static_cast<std::size_t>(f)] = mx;
  }
  return st;
}

}  // namespace ravg
