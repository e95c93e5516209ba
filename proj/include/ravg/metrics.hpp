// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics. PSNR and SSIM clip inputs to [0, peak] first; PSNR of
// identical images is reported as +infinity. SSIM uses the standard 11x11
// Gaussian window (sigma 1.5), k1=0.01, k2=0.03, on valid windows only.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ravg/common.hpp"
#include "ravg/tensor.hpp"

namespace ravg {

template <class S>
double psnr(const TensorT<S>& x, const TensorT<S>& y, double peak = 1.0) {
  detail::require_same_shape(x, y, "psnr");
  const std::size_t n = x.size();
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = static_cast<double>(x.data()[i]);
    double b = static_cast<double>(y.data()[i]);
    a = a < 0.0 ? 0.0 : (a > peak ? peak : a);
    b = b < 0.0 ? 0.0 : (b > peak ? peak : b);
    mse += (a - b) * (a - b);
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int r = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    s += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= s;
  return w;
}

// Separable valid-region Gaussian filter of one [H,W] plane.
inline std::vector<double> gauss_valid(const std::vector<double>& img, std::size_t H,
                                       std::size_t W, const std::vector<double>& win) {
  const std::size_t k = win.size();
  const std::size_t oh = H - k + 1, ow = W - k + 1;
  std::vector<double> tmp(oh * W, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += win[i] * img[(y + i) * W + x];
      tmp[y * W + x] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += win[i] * tmp[y * W + x + i];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

// Mean local SSIM over valid windows, averaged over channels. Inputs are
// [H,W] or [C,H,W] with 1 or 3 channels, clipped to [0,1] (dynamic range 1).
template <class S>
double ssim(const TensorT<S>& x, const TensorT<S>& y) {
  detail::require_same_shape(x, y, "ssim");
  require(x.rank() == 2 || x.rank() == 3, "ssim: input must be [H,W] or [C,H,W]");
  const std::size_t C = x.rank() == 3 ? x.dim(0) : 1;
  require(C == 1 || C == 3, "ssim: 1 or 3 channels supported");
  const std::size_t H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
  constexpr int kWin = 11;
  if (H < kWin || W < kWin)
    throw ShapeError("ssim: image smaller than the 11x11 window");
  static const std::vector<double> win = detail::gaussian_window(kWin, 1.5);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t hw = H * W;
    std::vector<double> a(hw), b(hw), aa(hw), bb(hw), ab(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      double va = static_cast<double>(x.data()[c * hw + i]);
      double vb = static_cast<double>(y.data()[c * hw + i]);
      va = va < 0.0 ? 0.0 : (va > 1.0 ? 1.0 : va);
      vb = vb < 0.0 ? 0.0 : (vb > 1.0 ? 1.0 : vb);
      a[i] = va;
      b[i] = vb;
      aa[i] = va * va;
      bb[i] = vb * vb;
      ab[i] = va * vb;
    }
    auto mu1 = detail::gauss_valid(a, H, W, win);
    auto mu2 = detail::gauss_valid(b, H, W, win);
    auto s11 = detail::gauss_valid(aa, H, W, win);
    auto s22 = detail::gauss_valid(bb, H, W, win);
    auto s12 = detail::gauss_valid(ab, H, W, win);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
      const double m1 = mu1[i], m2 = mu2[i];
      const double v1 = s11[i] - m1 * m1;
      const double v2 = s22[i] - m2 * m2;
      const double cov = s12[i] - m1 * m2;
      acc += ((2 * m1 * m2 + c1) * (2 * cov + c2)) /
             ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
    }
    total += acc / static_cast<double>(mu1.size());
  }
  return total / static_cast<double>(C);
}

// Mean over pixels/channels of the per-pixel unbiased variance across
// aligned frames; quantifies flicker on static scenes.
template <class S>
double temporal_variance(const std::vector<TensorT<S>>& frames) {
  if (frames.size() < 2)
    throw ConfigError("temporal_variance needs at least 2 frames");
  const std::size_t n = frames[0].size();
  for (const auto& f : frames)
    require(f.shape() == frames[0].shape(), "temporal_variance: shape mismatch");
  const double T = static_cast<double>(frames.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, s2 = 0.0;
    for (const auto& f : frames) {
      const double v = static_cast<double>(f.data()[i]);
      s += v;
      s2 += v * v;
    }
    acc += (s2 - s * s / T) / (T - 1.0);
  }
  return acc / static_cast<double>(n);
}

}  // namespace ravg
