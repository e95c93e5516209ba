// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Convolution layer and activation helpers on top of the tensor engine.
// conv2d is same-padded cross-correlation; every output element is produced
// by exactly one worker with a fixed accumulation order (ic, ky, kx), so
// results do not depend on the thread count.
#pragma once

#include <cmath>

#include "ravg/rng.hpp"
#include "ravg/tensor.hpp"
#include "ravg/thread_pool.hpp"

namespace ravg {

template <class S>
struct ConvLayerT {
  TensorT<S> weight;  // [out_ch, in_ch, kh, kw]
  TensorT<S> bias;    // [out_ch]

  static ConvLayerT make(int in_ch, int out_ch, int kh, int kw) {
    require(kh % 2 == 1 && kw % 2 == 1, "conv layer: kernel dims must be odd");
    require(in_ch > 0 && out_ch > 0, "conv layer: channel counts must be positive");
    ConvLayerT l;
    l.weight = TensorT<S>::zeros({static_cast<std::size_t>(out_ch),
                                  static_cast<std::size_t>(in_ch),
                                  static_cast<std::size_t>(kh),
                                  static_cast<std::size_t>(kw)});
    l.bias = TensorT<S>::zeros({static_cast<std::size_t>(out_ch)});
    l.weight.set_requires_grad(true);
    l.bias.set_requires_grad(true);
    return l;
  }

  int out_ch() const { return static_cast<int>(weight.dim(0)); }
  int in_ch() const { return static_cast<int>(weight.dim(1)); }
  int kh() const { return static_cast<int>(weight.dim(2)); }
  int kw() const { return static_cast<int>(weight.dim(3)); }
};

// He-style fan-in initialization; `tag` keys the layer inside the model so
// the draw order never depends on construction timing.
template <class S>
void he_init(ConvLayerT<S>& layer, std::uint64_t seed, std::uint64_t tag) {
  const double fan_in = static_cast<double>(layer.in_ch()) * layer.kh() * layer.kw();
  const double scale = std::sqrt(2.0 / fan_in);
  S* w = layer.weight.data();
  for (std::size_t i = 0; i < layer.weight.size(); ++i) {
    w[i] = static_cast<S>(scale * rng::normal(rng::hash4(seed, tag, 2 * i, 0x6e),
                                              rng::hash4(seed, tag, 2 * i + 1, 0x6e)));
  }
  // biases stay zero
}

namespace detail {

// Adds one same-padded correlation row: orow[x] += wk[kx]*irow[x+kx-pw], tap
// by tap onto the running output value, i.e. the exact accumulation order of
// a plain nested loop. A compile-time tap count keeps the interior loop
// fused (single load/store of orow per element) and vectorized.
template <int KW, class S>
inline void add_conv_row(const S* __restrict__ irow, S* __restrict__ orow,
                         const S* wk, std::ptrdiff_t W) {
  constexpr std::ptrdiff_t pw = KW / 2;
  const std::ptrdiff_t xa = std::min<std::ptrdiff_t>(pw, W);
  const std::ptrdiff_t xb = std::max<std::ptrdiff_t>(xa, W - pw);
  auto edge = [&](std::ptrdiff_t x) {
    S acc = orow[x];
    for (int kx = 0; kx < KW; ++kx) {
      const std::ptrdiff_t ix = x + kx - pw;
      if (ix >= 0 && ix < W) acc += wk[kx] * irow[ix];
    }
    orow[x] = acc;
  };
  for (std::ptrdiff_t x = 0; x < xa; ++x) edge(x);
  for (std::ptrdiff_t x = xa; x < xb; ++x) {
    S acc = orow[x];
    for (int kx = 0; kx < KW; ++kx) acc += wk[kx] * irow[x + kx - pw];
    orow[x] = acc;
  }
  for (std::ptrdiff_t x = xb; x < W; ++x) edge(x);
}

template <class S>
inline void add_conv_row_generic(const S* __restrict__ irow, S* __restrict__ orow,
                                 const S* wk, std::ptrdiff_t W, std::size_t KW) {
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(KW / 2);
  for (std::size_t kx = 0; kx < KW; ++kx) {
    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
    const S w = wk[kx];
    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
    const S* __restrict__ src = irow + dx;
    for (std::ptrdiff_t x = x0; x < x1; ++x) orow[x] += w * src[x];
  }
}

template <class S>
inline void dispatch_conv_row(const S* irow, S* orow, const S* wk, std::ptrdiff_t W,
                              std::size_t KW) {
  switch (KW) {
    case 1: add_conv_row<1>(irow, orow, wk, W); break;
    case 3: add_conv_row<3>(irow, orow, wk, W); break;
    case 5: add_conv_row<5>(irow, orow, wk, W); break;
    case 7: add_conv_row<7>(irow, orow, wk, W); break;
    default: add_conv_row_generic(irow, orow, wk, W, KW); break;
  }
}

}  // namespace detail

// input: [N,C,H,W] or [C,H,W] (treated as N=1). Output keeps the input rank.
template <class S>
TensorT<S> conv2d(const TensorT<S>& input, const ConvLayerT<S>& layer) {
  const bool batched = input.rank() == 4;
  require(batched || input.rank() == 3, "conv2d: input must be [N,C,H,W] or [C,H,W]");
  const std::size_t N = batched ? input.dim(0) : 1;
  const std::size_t C = input.dim(batched ? 1 : 0);
  const std::size_t H = input.dim(batched ? 2 : 1);
  const std::size_t W = input.dim(batched ? 3 : 2);
  const std::size_t OC = static_cast<std::size_t>(layer.out_ch());
  const std::size_t KH = static_cast<std::size_t>(layer.kh());
  const std::size_t KW = static_cast<std::size_t>(layer.kw());
  require(C == static_cast<std::size_t>(layer.in_ch()),
          "conv2d: input channels " + std::to_string(C) + " do not match layer in_ch " +
              std::to_string(layer.in_ch()));
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(KH / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(KW / 2);

  Shape out_shape = batched ? Shape{N, OC, H, W} : Shape{OC, H, W};
  TensorT<S> out = TensorT<S>::zeros(out_shape);

  const S* in = input.data();
  const S* wgt = layer.weight.data();
  const S* bs = layer.bias.data();
  S* po = out.data();
  const std::ptrdiff_t iH = static_cast<std::ptrdiff_t>(H);
  const std::ptrdiff_t iW = static_cast<std::ptrdiff_t>(W);

  parallel_for(N * OC, [&](std::size_t task) {
    const std::size_t n = task / OC;
    const std::size_t oc = task % OC;
    S* oplane = po + (n * OC + oc) * H * W;
    for (std::size_t i = 0; i < H * W; ++i) oplane[i] = bs[oc];
    for (std::size_t ic = 0; ic < C; ++ic) {
      const S* iplane = in + (n * C + ic) * H * W;
      const S* wrow = wgt + ((oc * C + ic) * KH) * KW;
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(iH, iH - dy);
        for (std::ptrdiff_t y = y0; y < y1; ++y) {
          detail::dispatch_conv_row(iplane + (y + dy) * iW, oplane + y * iW,
                                    wrow + ky * KW, iW, KW);
        }
      }
    }
  });

  const bool needs_grad = detail::track(input) || detail::track(layer.weight) ||
                          detail::track(layer.bias);
  if (needs_grad) {
    out.set_requires_grad(true);
    auto ind = input.store(), wd = layer.weight.store(), bd = layer.bias.store(),
         od = out.store();
    TapeT<S>::current().record([ind, wd, bd, od, N, C, H, W, OC, KH, KW, ph, pw] {
      if (od->grad.empty()) return;
      const S* go = od->grad.data();
      const S* in = ind->value.data();
      const S* wgt = wd->value.data();
      const std::ptrdiff_t iH = static_cast<std::ptrdiff_t>(H);
      const std::ptrdiff_t iW = static_cast<std::ptrdiff_t>(W);

      if (bd->requires_grad) {
        S* gb = detail::ensure_grad(bd).data();
        for (std::size_t oc = 0; oc < OC; ++oc) {
          S acc = S(0);
          for (std::size_t n = 0; n < N; ++n) {
            const S* gplane = go + (n * OC + oc) * H * W;
            for (std::size_t i = 0; i < H * W; ++i) acc += gplane[i];
          }
          gb[oc] += acc;
        }
      }

      if (wd->requires_grad) {
        // Row dot products use 8-way striped partial sums combined in a fixed
        // order, so the result is deterministic and the loop vectorizes.
        auto dot8 = [](const S* __restrict__ a, const S* __restrict__ b,
                       std::ptrdiff_t n) -> S {
          S p[8] = {};
          std::ptrdiff_t x = 0;
          for (; x + 8 <= n; x += 8)
            for (int j = 0; j < 8; ++j) p[j] += a[x + j] * b[x + j];
          S tail = S(0);
          for (; x < n; ++x) tail += a[x] * b[x];
          return (((p[0] + p[1]) + (p[2] + p[3])) +
                  ((p[4] + p[5]) + (p[6] + p[7]))) + tail;
        };
        S* gw = detail::ensure_grad(wd).data();
        parallel_for(OC, [&](std::size_t oc) {
          for (std::size_t ic = 0; ic < C; ++ic) {
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
                S acc = S(0);
                for (std::size_t n = 0; n < N; ++n) {
                  const S* iplane = in + (n * C + ic) * H * W;
                  const S* gplane = go + (n * OC + oc) * H * W;
                  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(iH, iH - dy);
                  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(iW, iW - dx);
                  for (std::ptrdiff_t y = y0; y < y1; ++y) {
                    acc += dot8(iplane + (y + dy) * iW + dx + x0,
                                gplane + y * iW + x0, x1 - x0);
                  }
                }
                gw[((oc * C + ic) * KH + ky) * KW + kx] += acc;
              }
            }
          }
        });
      }

      if (ind->requires_grad) {
        // d_in[iy][ix] += sum_kx w[ky][kx] * d_out[iy-dy][ix-kx+pw]: the same
        // row pattern as the forward with the tap order flipped.
        S* gi = detail::ensure_grad(ind).data();
        parallel_for(N * C, [&](std::size_t task) {
          const std::size_t n = task / C;
          const std::size_t ic = task % C;
          S* giplane = gi + (n * C + ic) * H * W;
          std::vector<S> wflip(KW);
          for (std::size_t oc = 0; oc < OC; ++oc) {
            const S* gplane = go + (n * OC + oc) * H * W;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
              const S* wk = wgt + ((oc * C + ic) * KH + ky) * KW;
              for (std::size_t kx = 0; kx < KW; ++kx) wflip[kx] = wk[KW - 1 - kx];
              const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, dy);
              const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(iH, iH + dy);
              for (std::ptrdiff_t iy = y0; iy < y1; ++iy) {
                detail::dispatch_conv_row(gplane + (iy - dy) * iW,
                                          giplane + iy * iW, wflip.data(), iW, KW);
              }
            }
          }
        });
      }
    });
  }
  return out;
}

enum class Activation { Relu, LeakyRelu, Sigmoid, SoftmaxChannel };

// Channel axis convention: rank >= 3 tensors use axis rank-3 ([C,H,W] or
// [N,C,H,W]); lower ranks use axis 0.
template <class S>
TensorT<S> softmax_channel(const TensorT<S>& a) {
  const int axis = a.rank() >= 3 ? static_cast<int>(a.rank()) - 3 : 0;
  return softmax(a, axis);
}

template <class S>
TensorT<S> activation(Activation kind, const TensorT<S>& a) {
  switch (kind) {
    case Activation::Relu: return relu(a);
    case Activation::LeakyRelu: return leaky_relu(a, 0.01);
    case Activation::Sigmoid: return sigmoid(a);
    case Activation::SoftmaxChannel: return softmax_channel(a);
  }
  throw ConfigError("unknown activation kind");
}

}  // namespace ravg
