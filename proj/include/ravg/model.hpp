// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Spatio-temporal kernel-predicting network: a shared spatial residual stack
// applied to every frame (as a batch), RA blocks exchanging information
// across frames at configured depths, and a kernel head reading the central
// frame's features. The tKPCN baseline replaces the RA blocks with a single
// temporal fusion module before the head.
#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "ravg/frame_data.hpp"
#include "ravg/kernels.hpp"
#include "ravg/nn.hpp"
#include "ravg/ra.hpp"

namespace ravg {

struct ModelConfig {
  int window_k = 2;  // T = 2k+1
  int channels = 16;
  int res_blocks = 6;
  std::vector<int> ra_positions = {2, 4, 6};  // 1-based block indices
  int skip_after_ra = 2;  // embedding skip after the first n RA blocks
  int kernel_h = 3, kernel_w = 3;
  double threshold = -1.0;  // < 0 selects the default 1/(2K)
  bool baseline_tkpcn = false;
  static constexpr int in_channels = 10;  // rgb + albedo + normal + confidence

  int frames() const { return 2 * window_k + 1; }
  int taps() const { return frames() * kernel_h * kernel_w; }
  double effective_threshold() const {
    return threshold < 0.0 ? 1.0 / (2.0 * taps()) : threshold;
  }

  void validate() const {
    if (window_k < 1) throw ConfigError("model config: window k must be >= 1");
    if (channels < 1) throw ConfigError("model config: channels must be positive");
    if (res_blocks < 1) throw ConfigError("model config: res_blocks must be positive");
    if (kernel_h < 1 || kernel_h % 2 == 0 || kernel_w < 1 || kernel_w % 2 == 0)
      throw ConfigError("model config: kernel dims must be positive and odd");
    for (int p : ra_positions)
      if (p < 1 || p > res_blocks)
        throw ConfigError("model config: ra position " + std::to_string(p) +
                          " outside [1, " + std::to_string(res_blocks) + "]");
    if (skip_after_ra < 0 ||
        skip_after_ra > static_cast<int>(ra_positions.size()))
      throw ConfigError("model config: skip_after_ra outside [0, #ra_positions]");
    if (threshold >= 0.0 && !(threshold < 1.0 / taps()))
      throw ConfigError("model config: threshold must satisfy t < 1/K");
  }
};

template <class S>
struct ModelT {
  ModelConfig cfg;
  ConvLayerT<S> embed;  // in_channels -> C
  struct ResBlock {
    ConvLayerT<S> c1, c2;  // C -> C, 3x3 each
  };
  std::vector<ResBlock> blocks;
  std::vector<RaParamsT<S>> ra;   // one per configured position
  ConvLayerT<S> fuse1, fuse2;     // baseline only: T*C -> C, C -> C
  ConvLayerT<S> head;             // C -> K, 3x3

  std::vector<std::pair<std::string, TensorT<S>>> named_parameters() const {
    std::vector<std::pair<std::string, TensorT<S>>> out;
    auto push = [&](const std::string& name, const ConvLayerT<S>& l) {
      out.emplace_back(name + ".weight", l.weight);
      out.emplace_back(name + ".bias", l.bias);
    };
    push("embed", embed);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      push("block" + std::to_string(i) + ".c1", blocks[i].c1);
      push("block" + std::to_string(i) + ".c2", blocks[i].c2);
    }
    for (std::size_t i = 0; i < ra.size(); ++i) {
      push("ra" + std::to_string(i) + ".head1", ra[i].head1);
      push("ra" + std::to_string(i) + ".head2", ra[i].head2);
    }
    if (cfg.baseline_tkpcn) {
      push("fuse1", fuse1);
      push("fuse2", fuse2);
    }
    push("head", head);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.size();
    return n;
  }

  void set_requires_grad(bool rg) {
    for (auto& [name, t] : named_parameters())
      const_cast<TensorT<S>&>(t).set_requires_grad(rg);
  }

  ModelT clone() const {
    ModelT m = *this;
    auto copy_layer = [](ConvLayerT<S>& l) {
      const bool rg = l.weight.requires_grad();
      l.weight = l.weight.clone().set_requires_grad(rg);
      l.bias = l.bias.clone().set_requires_grad(rg);
    };
    copy_layer(m.embed);
    for (auto& b : m.blocks) {
      copy_layer(b.c1);
      copy_layer(b.c2);
    }
    for (auto& r : m.ra) {
      copy_layer(r.head1);
      copy_layer(r.head2);
    }
    copy_layer(m.fuse1);
    copy_layer(m.fuse2);
    copy_layer(m.head);
    return m;
  }
};

// Deterministic initialization: He fan-in conv weights, zero biases, and the
// RA weight-head final bias at -2 so training starts close to identity in
// time (sigmoid(-2) ~ 0.12).
template <class S>
ModelT<S> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelT<S> m;
  m.cfg = cfg;
  std::uint64_t tag = 0;
  auto init = [&](ConvLayerT<S>& l) { he_init(l, seed, tag++); };
  m.embed = ConvLayerT<S>::make(ModelConfig::in_channels, cfg.channels, 3, 3);
  init(m.embed);
  for (int b = 0; b < cfg.res_blocks; ++b) {
    typename ModelT<S>::ResBlock rb;
    rb.c1 = ConvLayerT<S>::make(cfg.channels, cfg.channels, 3, 3);
    rb.c2 = ConvLayerT<S>::make(cfg.channels, cfg.channels, 3, 3);
    init(rb.c1);
    init(rb.c2);
    m.blocks.push_back(std::move(rb));
  }
  if (!cfg.baseline_tkpcn) {
    for (std::size_t i = 0; i < cfg.ra_positions.size(); ++i) {
      RaParamsT<S> p = RaParamsT<S>::make(cfg.channels);
      init(p.head1);
      init(p.head2);
      p.head2.bias.data()[0] = S(-2);
      m.ra.push_back(std::move(p));
    }
  }
  m.fuse1 = ConvLayerT<S>::make(cfg.frames() * cfg.channels, cfg.channels, 3, 3);
  m.fuse2 = ConvLayerT<S>::make(cfg.channels, cfg.channels, 3, 3);
  if (cfg.baseline_tkpcn) {
    init(m.fuse1);
    init(m.fuse2);
  }
  m.head = ConvLayerT<S>::make(cfg.channels, cfg.taps(), 3, 3);
  init(m.head);
  m.set_requires_grad(true);
  return m;
}

struct ForwardOptions {
  double threshold_override = -1.0;  // < 0: use the config threshold
  bool identity_kernels = false;     // bypass the head with delta kernels
  bool softmax_kernels = false;      // softmax baseline normalization
};

template <class S>
struct ForwardResultT {
  KernelFieldT<S> kernels;
  TensorT<S> denoised;  // [3,H,W]
};

template <class S>
ForwardResultT<S> forward(const ModelT<S>& model,
                          const std::vector<TensorT<S>>& frames,
                          const ForwardOptions& opts = {}) {
  const ModelConfig& cfg = model.cfg;
  const int T = cfg.frames();
  require(static_cast<int>(frames.size()) == T,
          "forward: window length " + std::to_string(frames.size()) +
              " does not match the model window " + std::to_string(T));
  for (const auto& f : frames)
    require(f.rank() == 3 && f.dim(0) == ModelConfig::in_channels,
            "forward: every frame must be [10,H,W]");
  const std::size_t H = frames[0].dim(1), W = frames[0].dim(2);

  TensorT<S> h = leaky_relu(conv2d(stack(frames), model.embed));
  TensorT<S> h0 = h;
  std::size_t ra_index = 0;
  for (int b = 1; b <= cfg.res_blocks; ++b) {
    const auto& rb = model.blocks[static_cast<std::size_t>(b - 1)];
    h = add(h, conv2d(leaky_relu(conv2d(h, rb.c1)), rb.c2));
    if (!cfg.baseline_tkpcn &&
        std::find(cfg.ra_positions.begin(), cfg.ra_positions.end(), b) !=
            cfg.ra_positions.end()) {
      LatentSequence<S> seq = unstack(h);
      seq = ra_block(seq, model.ra[ra_index]);
      h = stack(seq);
      if (static_cast<int>(ra_index) < cfg.skip_after_ra) h = add(h, h0);
      ++ra_index;
    }
  }

  TensorT<S> center_features;
  if (cfg.baseline_tkpcn) {
    // temporal fusion: concatenate all frame features along channels
    std::vector<TensorT<S>> per_frame;
    for (auto& f : unstack(h)) per_frame.push_back(f);
    TensorT<S> fused = concat(per_frame, 0);
    center_features = leaky_relu(conv2d(leaky_relu(conv2d(fused, model.fuse1)),
                                        model.fuse2));
  } else {
    center_features = reshape(slice(h, 0, static_cast<std::size_t>(T / 2), 1),
                              {static_cast<std::size_t>(cfg.channels), H, W});
  }

  ForwardResultT<S> res;
  if (opts.identity_kernels) {
    TensorT<S> w = TensorT<S>::zeros({static_cast<std::size_t>(cfg.taps()), H, W});
    KernelFieldT<S> f = KernelFieldT<S>::raw(std::move(w), T, cfg.kernel_h, cfg.kernel_w);
    for (std::size_t p = 0; p < H * W; ++p)
      f.weights.data()[f.center_channel() * H * W + p] = S(1);
    f.normalized = true;
    res.kernels = std::move(f);
  } else {
    TensorT<S> raw = conv2d(center_features, model.head);
    KernelFieldT<S> f = KernelFieldT<S>::raw(raw, T, cfg.kernel_h, cfg.kernel_w);
    if (opts.softmax_kernels) {
      res.kernels = softmax_normalize(f);
    } else {
      const double t = opts.threshold_override >= 0.0 ? opts.threshold_override
                                                      : cfg.effective_threshold();
      res.kernels = threshold_normalize(f, t);
    }
  }

  std::vector<TensorT<S>> rgb;
  rgb.reserve(frames.size());
  for (const auto& f : frames) rgb.push_back(slice(f, 0, 0, 3));
  res.denoised = apply_kernels(res.kernels, rgb);
  return res;
}

// --- checkpoint persistence (float pipeline) -------------------------------

void save_checkpoint(const ModelT<float>& model, const std::string& dir);
ModelT<float> load_checkpoint(const std::string& dir);

// --- sliding-window inference ----------------------------------------------

struct DenoiseOptions {
  int passes = 1;
  double threshold_override = -1.0;
  bool collect_stats = false;
  bool collect_contributions = false;  // per-frame kernel mass images [T,H,W]
};

struct DenoiseResult {
  std::vector<Tensor> frames;  // denoised rgb, one per input frame
  std::vector<Tensor> aov_frames;  // filled when an aov stream is supplied
  std::vector<FrameWeightStats> stats;
  std::vector<Tensor> contributions;
  std::vector<bool> edge_clamped;  // window was padded with the nearest frame
};

DenoiseResult denoise_sequence(const ModelT<float>& model,
                               const std::vector<FrameData>& frames,
                               const DenoiseOptions& opts = {},
                               const std::vector<Tensor>* aov = nullptr);

}  // namespace ravg
