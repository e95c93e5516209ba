// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ravg/loss.hpp"
#include "ravg/model.hpp"
#include "ravg/rng.hpp"

using namespace ravg;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.window_k = 2;
  cfg.channels = 8;
  cfg.res_blocks = 3;
  cfg.ra_positions = {2, 3};
  cfg.skip_after_ra = 1;
  cfg.kernel_h = 3;
  cfg.kernel_w = 3;
  return cfg;
}

template <class S>
std::vector<TensorT<S>> random_window(int T, std::size_t H, std::size_t W,
                                      std::uint64_t seed) {
  std::vector<TensorT<S>> frames;
  for (int t = 0; t < T; ++t) {
    TensorT<S> f = TensorT<S>::zeros({10, H, W});
    for (std::size_t i = 0; i < f.size(); ++i)
      f.data()[i] = static_cast<S>(
          rng::uniform01(rng::hash4(seed, static_cast<std::uint64_t>(t), i, 9)));
    frames.push_back(f);
  }
  return frames;
}

fs::path temp_dir(const char* name) {
  auto p = fs::temp_directory_path() / "ravg_model_tests" / name;
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("build is deterministic in the seed and reports parameters") {
  auto cfg = tiny_config();
  auto a = build_model<float>(cfg, 7);
  auto b = build_model<float>(cfg, 7);
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.values() == pb[i].second.values());
  }
  CHECK(a.parameter_count() > 0);
  auto c = build_model<float>(cfg, 8);
  CHECK(c.embed.weight.values() != a.embed.weight.values());
}

TEST_CASE("degenerate config without RA positions builds a purely spatial model") {
  auto cfg = tiny_config();
  cfg.ra_positions = {};
  cfg.skip_after_ra = 0;
  auto m = build_model<float>(cfg, 1);
  auto out = forward(m, random_window<float>(5, 8, 8, 1));
  CHECK(out.denoised.shape() == Shape{3, 8, 8});
}

TEST_CASE("paper-scale topology builds with a parameter count on the expected order") {
  ModelConfig cfg;
  cfg.window_k = 2;
  cfg.channels = 80;
  cfg.res_blocks = 24;
  cfg.ra_positions = {3, 6, 9, 12, 15, 24};
  cfg.skip_after_ra = 4;
  cfg.kernel_h = 5;
  cfg.kernel_w = 5;
  auto m = build_model<float>(cfg, 1);
  const auto n = m.parameter_count();
  CHECK(n > 2'400'000);   // within one order of magnitude of 24M
  CHECK(n < 240'000'000);
}

TEST_CASE("invalid configs are rejected with the violated constraint") {
  auto cfg = tiny_config();
  cfg.ra_positions = {9};
  CHECK_THROWS_AS(build_model<float>(cfg, 1), ConfigError);
  cfg = tiny_config();
  cfg.kernel_h = 4;
  CHECK_THROWS_AS(build_model<float>(cfg, 1), ConfigError);
  cfg = tiny_config();
  cfg.threshold = 1.0;  // >= 1/K
  CHECK_THROWS_AS(build_model<float>(cfg, 1), ConfigError);
}

TEST_CASE("forward: constant-in-time noise-free input returns the constant") {
  auto m = build_model<float>(tiny_config(), 3);
  std::vector<Tensor> frames(5, Tensor::full({10, 8, 8}, 0.31f));
  auto out = forward(m, frames);
  for (float v : out.denoised.values()) CHECK(v == doctest::Approx(0.31f).epsilon(1e-5));
}

TEST_CASE("forward: window length mismatch is an error") {
  auto m = build_model<float>(tiny_config(), 3);
  CHECK_THROWS_AS(forward(m, random_window<float>(3, 8, 8, 2)), ShapeError);
}

TEST_CASE("identity path: RA weights at -20 plus identity kernels pass the center through") {
  auto m = build_model<float>(tiny_config(), 4);
  for (auto& r : m.ra) r.head2.bias.data()[0] = -20.f;
  auto frames = random_window<float>(5, 8, 8, 3);
  ForwardOptions opts;
  opts.identity_kernels = true;
  auto out = forward(m, frames, opts);
  auto center_rgb = slice(frames[2], 0, 0, 3);
  for (std::size_t i = 0; i < out.denoised.size(); ++i)
    CHECK(std::abs(out.denoised.values()[i] - center_rgb.values()[i]) < 1e-6f);
}

TEST_CASE("forward on random input: correct shape, kernels normalized per pixel") {
  auto m = build_model<float>(tiny_config(), 5);
  auto frames = random_window<float>(5, 12, 10, 4);
  auto out = forward(m, frames);
  CHECK(out.denoised.shape() == Shape{3, 12, 10});
  const std::size_t K = out.kernels.taps(), HW = 120;
  for (std::size_t p = 0; p < HW; ++p) {
    float s = 0.f;
    for (std::size_t i = 0; i < K; ++i) s += out.kernels.weights.values()[i * HW + p];
    CHECK(std::abs(s - 1.f) < 1e-5f);
  }
  // output is bounded by the input range (convex combination of rgb values)
  for (float v : out.denoised.values()) {
    CHECK(v >= -1e-5f);
    CHECK(v <= 1.f + 1e-5f);
  }
}

TEST_CASE("shared parameters: swapping equal-content side frames changes nothing") {
  auto m = build_model<float>(tiny_config(), 6);
  auto frames = random_window<float>(5, 8, 8, 5);
  frames[3] = frames[1].clone();  // same content in both side slots
  auto out1 = forward(m, frames);
  std::swap(frames[1], frames[3]);
  auto out2 = forward(m, frames);
  CHECK(out1.denoised.values() == out2.denoised.values());
}

TEST_CASE("tKPCN baseline forwards and exposes fusion parameters") {
  auto cfg = tiny_config();
  cfg.baseline_tkpcn = true;
  auto m = build_model<float>(cfg, 7);
  auto out = forward(m, random_window<float>(5, 8, 8, 6));
  CHECK(out.denoised.shape() == Shape{3, 8, 8});
  bool has_fuse = false;
  for (const auto& [name, t] : m.named_parameters())
    if (name.rfind("fuse", 0) == 0) has_fuse = true;
  CHECK(has_fuse);
}

TEST_CASE("checkpoint round trip is bit exact; corruption and mismatches error") {
  auto m = build_model<float>(tiny_config(), 8);
  auto dir = temp_dir("ckpt").string();
  save_checkpoint(m, dir);
  auto loaded = load_checkpoint(dir);
  auto pa = m.named_parameters();
  auto pb = loaded.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].second.values() == pb[i].second.values());

  auto frames = random_window<float>(5, 8, 8, 7);
  NoGradGuard ng;
  CHECK(forward(m, frames).denoised.values() ==
        forward(loaded, frames).denoised.values());

  // corrupt the params magic
  {
    std::fstream f(fs::path(dir) / "params.rtf",
                   std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(dir), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt"), DataError);
}

TEST_CASE("end-to-end gradient check on an 8x8 T=5 toy model (64-bit)") {
  ModelConfig cfg;
  cfg.window_k = 2;
  cfg.channels = 4;
  cfg.res_blocks = 2;
  cfg.ra_positions = {1};
  cfg.skip_after_ra = 1;
  cfg.kernel_h = 3;
  cfg.kernel_w = 3;
  auto m = build_model<double>(cfg, 9);
  auto frames = random_window<double>(5, 8, 8, 8);
  auto ref = DTensor::zeros({3, 8, 8});
  for (std::size_t i = 0; i < ref.size(); ++i)
    ref.data()[i] = rng::uniform01(rng::hash2(77, i));
  LossConfig lcfg;
  lcfg.lambda_global = 0.1;

  auto loss_of = [&](const ModelT<double>& model) {
    auto out = forward(model, frames);
    std::vector<DTensor> rgb;
    for (const auto& f : frames) rgb.push_back(slice(f, 0, 0, 3));
    return temporal_loss(out.kernels, rgb, ref, lcfg);
  };

  // gradient with respect to a mid-stack conv weight
  auto err_w = grad_check<double>(
      [&](DTensor& w) {
        ModelT<double> m2 = m;
        m2.blocks[1].c1.weight = w;
        return add(loss_of(m2), mul(sum(mul(w, w)), 0.05));
      },
      m.blocks[1].c1.weight.clone());
  CHECK(err_w < 1e-4);

  // gradient with respect to the RA weight head
  auto err_ra = grad_check<double>(
      [&](DTensor& w) {
        ModelT<double> m2 = m;
        m2.ra[0].head1.weight = w;
        return add(loss_of(m2), mul(sum(mul(w, w)), 0.05));
      },
      m.ra[0].head1.weight.clone());
  CHECK(err_ra < 1e-4);

  // gradient with respect to the kernel head
  auto err_h = grad_check<double>(
      [&](DTensor& w) {
        ModelT<double> m2 = m;
        m2.head.weight = w;
        return add(loss_of(m2), mul(sum(mul(w, w)), 0.05));
      },
      m.head.weight.clone());
  CHECK(err_h < 1e-4);
}
