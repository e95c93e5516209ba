// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Spatial losses and the spatial-to-temporal loss conversion. The temporal
// loss asks the kernels to reconstruct the same center reference from frame
// subsets (center singleton, one pair before/after on each side), built by
// masking and renormalizing the predicted kernels.
#pragma once

#include "ravg/kernels.hpp"
#include "ravg/tensor.hpp"

namespace ravg {

enum class BaseLoss { Smape, L1 };

struct LossConfig {
  BaseLoss base = BaseLoss::Smape;
  double lambda_center = 1.0;
  double lambda_pair = 1.0;
  double lambda_global = 0.0;  // 0.1 in the post-training phase
  double smape_eps = 1e-2;
};

// mean over pixels/channels of |x-y| / (|x| + |y| + eps); in [0,1) for
// nonnegative inputs with eps > 0.
template <class S>
TensorT<S> smape(const TensorT<S>& x, const TensorT<S>& y, double eps = 1e-2) {
  detail::require_same_shape(x, y, "smape");
  auto num = ravg::abs(sub(x, y));
  auto den = add(add(ravg::abs(x), ravg::abs(y)), eps);
  return mean(div(num, den));
}

template <class S>
TensorT<S> l1(const TensorT<S>& x, const TensorT<S>& y) {
  detail::require_same_shape(x, y, "l1");
  return mean(ravg::abs(sub(x, y)));
}

template <class S>
TensorT<S> base_loss(const LossConfig& cfg, const TensorT<S>& x, const TensorT<S>& y) {
  return cfg.base == BaseLoss::Smape ? smape(x, y, cfg.smape_eps) : l1(x, y);
}

// Base loss on the full combined output (the ablation's "spatial loss").
template <class S>
TensorT<S> spatial_loss(const TensorT<S>& denoised, const TensorT<S>& ref,
                        const LossConfig& cfg) {
  return base_loss(cfg, denoised, ref);
}

// Per-term breakdown is reported by the trainer's diagnostics.
struct TemporalLossTerms {
  double center = 0.0;
  double pair_a = 0.0;
  double pair_b = 0.0;
  double global = 0.0;
};

// L = lc*l(g_center, ref) + lp*l(g_{-k,+k-1}, ref) + lp*l(g_{-k+1,+k}, ref)
//   + lg*l(g_full, ref), every g built from the same predicted kernels by
// subset masking. The same center reference is used in every term.
template <class S>
TensorT<S> temporal_loss(const KernelFieldT<S>& kernels,
                         const std::vector<TensorT<S>>& seq,
                         const TensorT<S>& ref_center, const LossConfig& cfg,
                         TemporalLossTerms* terms = nullptr) {
  const int T = kernels.frames;
  if (T < 5)
    throw ConfigError("temporal_loss: the pair term set needs a window of 5+ frames");
  const int k = T / 2;
  auto term = [&](const std::set<int>& keep) {
    return base_loss(cfg, apply_kernels(mask_renormalize(kernels, keep), seq),
                     ref_center);
  };
  TensorT<S> loss = TensorT<S>::scalar(S(0));
  TensorT<S> t_center = term({k});
  TensorT<S> t_pair_a = term({0, T - 2});      // offsets (-k, +k-1)
  TensorT<S> t_pair_b = term({1, T - 1});      // offsets (-k+1, +k)
  loss = add(loss, mul(t_center, cfg.lambda_center));
  loss = add(loss, mul(t_pair_a, cfg.lambda_pair));
  loss = add(loss, mul(t_pair_b, cfg.lambda_pair));
  TensorT<S> t_global;
  if (cfg.lambda_global != 0.0) {
    t_global = base_loss(cfg, apply_kernels(kernels, seq), ref_center);
    loss = add(loss, mul(t_global, cfg.lambda_global));
  }
  if (terms) {
    terms->center = static_cast<double>(t_center.item());
    terms->pair_a = static_cast<double>(t_pair_a.item());
    terms->pair_b = static_cast<double>(t_pair_b.item());
    terms->global = t_global.defined() ? static_cast<double>(t_global.item()) : 0.0;
  }
  return loss;
}

}  // namespace ravg
