// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Robust Average blocks: latent-space temporal interpolation with learned
// per-pixel weights. The robust average of a set is its mean after
// discarding the minimum and maximum.
#pragma once

#include <cstdint>

#include "ravg/nn.hpp"
#include "ravg/tensor.hpp"

namespace ravg {

// Ordered window of T latent frames [C,H,W], index 0..T-1 (center at T/2).
template <class S>
using LatentSequence = std::vector<TensorT<S>>;

// Robust average along axis 0 of a stacked tensor [T, ...], T >= 3.
//
// Per coordinate: discard the first minimum and the first maximum (when they
// collide on an all-extremal element, the next candidate is discarded for the
// max), then average the rest. Summation runs in ascending index order.
// Backward routes 1/(T-2) to the retained elements and 0 to the discarded.
template <class S>
TensorT<S> robust_average(const TensorT<S>& stacked) {
  require(stacked.rank() >= 1, "robust_average: rank-0 input");
  const std::size_t T = stacked.dim(0);
  if (T < 3) throw ConfigError("robust_average requires a set of at least 3");
  Shape out_shape(stacked.shape().begin() + 1, stacked.shape().end());
  TensorT<S> out = TensorT<S>::zeros(out_shape);
  const std::size_t M = out.size();
  const S* pv = stacked.data();
  S* po = out.data();
  auto min_idx = std::make_shared<std::vector<std::uint8_t>>(M);
  auto max_idx = std::make_shared<std::vector<std::uint8_t>>(M);
  // Streaming i-outer passes keep the walks contiguous; the retained-element
  // accumulation still runs in ascending index order per coordinate.
  parallel_chunks(M, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
    std::uint8_t* mn = min_idx->data();
    std::uint8_t* mx = max_idx->data();
    std::vector<S> mnv(pv + lo, pv + hi);
    for (std::size_t j = lo; j < hi; ++j) mn[j] = 0;
    for (std::size_t i = 1; i < T; ++i) {
      const S* row = pv + i * M;
      for (std::size_t j = lo; j < hi; ++j) {
        if (row[j] < mnv[j - lo]) {
          mnv[j - lo] = row[j];
          mn[j] = static_cast<std::uint8_t>(i);
        }
      }
    }
    std::vector<S> mxv(hi - lo);
    for (std::size_t j = lo; j < hi; ++j) {
      mx[j] = mn[j] == 0 ? 1 : 0;
      mxv[j - lo] = pv[mx[j] * M + j];
    }
    for (std::size_t i = 0; i < T; ++i) {
      const S* row = pv + i * M;
      for (std::size_t j = lo; j < hi; ++j) {
        if (i != mn[j] && row[j] > mxv[j - lo]) {
          mxv[j - lo] = row[j];
          mx[j] = static_cast<std::uint8_t>(i);
        }
      }
    }
    for (std::size_t j = lo; j < hi; ++j) po[j] = S(0);
    for (std::size_t i = 0; i < T; ++i) {
      const S* row = pv + i * M;
      for (std::size_t j = lo; j < hi; ++j)
        if (i != mn[j] && i != mx[j]) po[j] += row[j];
    }
    for (std::size_t j = lo; j < hi; ++j) po[j] /= static_cast<S>(T - 2);
  });
  if (detail::track(stacked)) {
    out.set_requires_grad(true);
    auto sd = stacked.store(), od = out.store();
    TapeT<S>::current().record([sd, od, min_idx, max_idx, T, M] {
      if (od->grad.empty()) return;
      S* gs = detail::ensure_grad(sd).data();
      const S inv = S(1) / static_cast<S>(T - 2);
      const std::uint8_t* mn = min_idx->data();
      const std::uint8_t* mx = max_idx->data();
      const S* go = od->grad.data();
      parallel_chunks(M, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = 0; i < T; ++i) {
          S* grow = gs + i * M;
          for (std::size_t j = lo; j < hi; ++j)
            if (i != mn[j] && i != mx[j]) grow[j] += go[j] * inv;
        }
      });
    });
  }
  return out;
}

// Weight head of an RA block: two same-padded conv layers (3x3 then 1x1)
// mapping [2C,H,W] -> [1,H,W], sigmoid output. Shared across the T recurrence
// steps within one block.
template <class S>
struct RaParamsT {
  ConvLayerT<S> head1;  // 2C -> C, 3x3, leaky_relu
  ConvLayerT<S> head2;  // C -> 1, 1x1

  static RaParamsT make(int channels) {
    RaParamsT p;
    p.head1 = ConvLayerT<S>::make(2 * channels, channels, 3, 3);
    p.head2 = ConvLayerT<S>::make(channels, 1, 1, 1);
    return p;
  }
};

// One recurrence step: excluded frame is blended with the robust average of
// the others. w = 0 keeps the excluded frame (identity); w = 1 replaces it.
// For T = 3 the remaining set is too small for a robust average and a plain
// mean is used instead; `plain_mean_fallback` reports that.
template <class S>
LatentSequence<S> ra_step(const LatentSequence<S>& seq, std::size_t excluded,
                          const RaParamsT<S>& params,
                          bool* plain_mean_fallback = nullptr) {
  const std::size_t T = seq.size();
  if (T < 3) throw ConfigError("ra_step requires a window of at least 3 frames");
  require(excluded < T, "ra_step: excluded index out of range");
  std::vector<TensorT<S>> others;
  others.reserve(T - 1);
  for (std::size_t i = 0; i < T; ++i)
    if (i != excluded) others.push_back(seq[i]);
  TensorT<S> avg;
  if (T >= 4) {
    avg = robust_average(stack(others));
  } else {
    avg = mean(stack(others), {0});
    if (plain_mean_fallback) *plain_mean_fallback = true;
  }
  TensorT<S> h = leaky_relu(conv2d(concat<S>({seq[excluded], avg}, 0), params.head1));
  TensorT<S> w = sigmoid(conv2d(h, params.head2));  // [1,H,W]
  const std::size_t C = seq[excluded].dim(0);
  TensorT<S> w_hw = reshape(w, {seq[excluded].dim(1), seq[excluded].dim(2)});
  TensorT<S> w_c = stack(std::vector<TensorT<S>>(C, w_hw));
  // x + w*(avg - x): algebraically (1-w)*x + w*avg, and bit-exact at avg == x,
  // so constant sequences are true fixed points.
  TensorT<S> blended = add(seq[excluded], mul(w_c, sub(avg, seq[excluded])));
  LatentSequence<S> out = seq;
  out[excluded] = blended;
  return out;
}

// Full RA block: each frame in turn is interpolated with the robust average
// of the others; each step consumes the previous step's output.
template <class S>
LatentSequence<S> ra_block(const LatentSequence<S>& seq, const RaParamsT<S>& params,
                           bool* plain_mean_fallback = nullptr) {
  LatentSequence<S> cur = seq;
  for (std::size_t i = 0; i < seq.size(); ++i)
    cur = ra_step(cur, i, params, plain_mean_fallback);
  return cur;
}

}  // namespace ravg
