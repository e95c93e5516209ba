// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline data carriers shared by the generator, trainer and inference:
// per-frame render buffers and motion-compensated training windows.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ravg/tensor.hpp"
#include "ravg/warp.hpp"

namespace ravg {

// One rendered frame. `flow_to[o]` maps this frame's pixels (as the window
// center) to their source locations in the frame at relative offset o.
struct FrameData {
  Tensor rgb;     // [3,H,W]
  Tensor albedo;  // [3,H,W], noise-free
  Tensor normal;  // [3,H,W], unit length, noise-free
  std::map<int, Tensor> flow_to;  // offset -> [2,H,W]
  Tensor ground_truth;  // [3,H,W]
  int spp = 0;
};

// A motion-compensated window of 2k+1 frames plus a cleaner target.
struct TrainSample {
  std::vector<Tensor> frames;  // T x [10,H,W]: rgb, albedo, normal, confidence
  Tensor target;               // [3,H,W], cleaner render of the center frame
  Tensor gt_center;            // [3,H,W], analytic ground truth (evaluation only)
  std::string noise_pair;
  std::string scene;
  std::uint64_t seed = 0;
  int center_t = 0;
};

// A window slot: which frame fills it and its temporal offset from the
// center (0 for the center itself or a clamped edge duplicate).
struct WindowSlot {
  const FrameData* frame = nullptr;
  int offset = 0;
};

// Builds the T x [10,H,W] network input: side frames are backward-warped to
// the center with the center's flows, confidence is computed from the warped
// AOVs, and all buffers are mixed toward the center in proportion to it.
// `rgb_override`, when given, replaces each frame's color channels (used by
// multi-pass denoising, which re-feeds previous outputs).
inline std::vector<Tensor> assemble_window(
    const FrameData& center, const std::vector<WindowSlot>& slots,
    const std::vector<const Tensor*>* rgb_override = nullptr) {
  std::vector<Tensor> out;
  out.reserve(slots.size());
  const std::size_t H = center.rgb.dim(1), W = center.rgb.dim(2);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const FrameData& f = *slots[i].frame;
    const Tensor& rgb = rgb_override ? *(*rgb_override)[i] : f.rgb;
    Tensor warped_rgb, warped_albedo, warped_normal, conf;
    if (slots[i].offset == 0) {
      warped_rgb = rgb;
      warped_albedo = f.albedo;
      warped_normal = f.normal;
      conf = Tensor::full({H, W}, 1.f);
    } else {
      auto it = center.flow_to.find(slots[i].offset);
      if (it == center.flow_to.end())
        throw DataError("assemble_window: missing flow for offset " +
                        std::to_string(slots[i].offset));
      auto wr = backward_warp(rgb, it->second);
      auto wa = backward_warp(f.albedo, it->second);
      auto wn = backward_warp(f.normal, it->second);
      conf = warp_confidence(wa.image, wn.image, center.albedo, center.normal,
                             wr.oob_mask);
      warped_rgb = confidence_mix(wr.image, rgb_override ? *(*rgb_override)[slots.size() / 2]
                                                         : center.rgb, conf);
      warped_albedo = confidence_mix(wa.image, center.albedo, conf);
      warped_normal = confidence_mix(wn.image, center.normal, conf);
    }
    out.push_back(concat<float>(
        {warped_rgb, warped_albedo, warped_normal, reshape(conf, {1, H, W})}, 0));
  }
  return out;
}

}  // namespace ravg
