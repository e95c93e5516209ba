// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic Monte Carlo scene generator. Scenes are layered
// textured primitives with per-layer affine motion; shading is baked into
// layer-local coordinates so exact flows transport ground truth. Every
// random draw is a pure function of (seed, frame, pixel, sample), so
// rendering parallelism never changes results.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ravg/frame_data.hpp"

namespace ravg {

struct SceneLayer {
  enum class Kind { Background, Quad, Disk };
  enum class Texture { Gradient, Checker, NoiseTex };
  Kind kind = Kind::Quad;
  Texture texture = Texture::Checker;
  double cx = 0, cy = 0;        // center at t = 0 (pixel units)
  double half_w = 12, half_h = 12;  // half extents; disks use half_w as radius
  double vx = 0, vy = 0;        // translation per frame
  double angle0 = 0, omega = 0; // rotation per frame (radians)
  double tex_scale = 8;
  double color_a[3] = {0.8, 0.3, 0.2};
  double color_b[3] = {0.2, 0.5, 0.8};
  double normal[3] = {0, 0, 1};
  double brightness = 1.0;
};

struct Scene {
  std::string name = "scene";
  int width = 96, height = 96;
  int frame_count = 24;
  std::vector<SceneLayer> layers;  // [0] is the background, later on top
  double sigma_s = 0.45;  // std of the multiplicative per-sample light factor
  double p_ff = 0.0;      // firefly probability per sample
  double i_ff = 0.0;      // firefly intensity
  std::uint64_t seed = 1;
};

// Built-in presets: pan-checker, rot-disks, tex-quads, static-checker.
Scene scene_preset(const std::string& name, std::uint64_t seed);
Scene scene_from_json_file(const std::string& path);

// Analytic per-pixel evaluation at frame t (the expected shading, including
// the firefly expectation correction that keeps the estimator unbiased).
void eval_ground_truth(const Scene& scene, int t, Tensor& rgb, Tensor& albedo,
                       Tensor& normal);

// Per-pixel index of the topmost covering layer; used to reason about
// disocclusion in tests and diagnostics.
Tensor layer_ids(const Scene& scene, int t);

// Monte Carlo render: mean of spp per-pixel samples, each the ground-truth
// shading scaled by a random light factor plus an occasional firefly spike.
// `realization` separates independent renders of the same frame. Flows to
// the in-range offsets in `flow_offsets` are computed analytically.
FrameData render_frame(const Scene& scene, int t, int spp, std::uint64_t realization,
                       const std::vector<int>& flow_offsets = {});

// Noise-level protocol: noisy = n spp, half = floor(n/e), low = 4 spp,
// pseudo_ref = an independent 4096 spp render.
struct NoisePair {
  std::string label;  // e.g. "half->pseudo_ref"
  int input_spp = 0;
  int target_spp = 0;
};
NoisePair noise_pair_from_label(const std::string& label, int base_spp);
std::vector<std::string> all_noise_pair_labels();

// Renders a motion-compensated window with independent per-frame seeds and a
// cleaner, independently seeded target for the center frame.
TrainSample make_sequence(const Scene& scene, int center_t, int k,
                          const NoisePair& pair, std::uint64_t seed);

// --- dataset persistence ----------------------------------------------------

struct DatasetWriteOptions {
  int tile = 0;  // 0 = no tiling; otherwise crop into tile x tile samples
};

void dataset_write(const std::vector<TrainSample>& samples, const std::string& dir,
                   int window_k, const DatasetWriteOptions& opts = {});
std::vector<TrainSample> dataset_read(const std::string& dir);

// --- sequence persistence (inference input) ---------------------------------

void sequence_write(const std::vector<FrameData>& frames, const std::string& dir,
                    const std::string& scene_name, int spp);
std::vector<FrameData> sequence_read(const std::string& dir);

}  // namespace ravg
