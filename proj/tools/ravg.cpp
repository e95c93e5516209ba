// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line interface for the denoising pipeline. Exit codes: 0 success,
// 1 usage/config error, 2 data error, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <malloc.h>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ravg/metrics.hpp"
#include "ravg/png.hpp"
#include "ravg/rtf.hpp"
#include "ravg/synth.hpp"
#include "ravg/trainer.hpp"

using namespace ravg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct GenDataArgs {
  std::string scene = "pan-checker";
  std::string scene_json;
  std::string out;
  int frames = 24;
  int spp = 32;
  int width = 96, height = 96;
  int window_k = 2;
  int tile = 64;
  std::uint64_t seed = 1;
  std::string pairs;  // comma list restricting the noise-pair pool
  double sigma_s = 0.45;
  double firefly_p = 0.0;
  double firefly_i = 0.0;
  bool sequence = false;
  bool png = false;
};

struct ModelFlags {
  std::string config = "desk-tiny";
  int window_k = -1;
  int channels = -1;
  int blocks = -1;
  std::string ra_positions;
  int skip_after_ra = -1;
  int kernel_size = -1;
  double threshold = -1.0;
  bool baseline = false;
};

ModelConfig resolve_model_config(const ModelFlags& f) {
  ModelConfig cfg;
  if (f.config == "desk-tiny") {
    cfg = ModelConfig{};
  } else if (f.config == "paper") {
    cfg.window_k = 2;
    cfg.channels = 80;
    cfg.res_blocks = 24;
    cfg.ra_positions = {3, 6, 9, 12, 15, 24};
    cfg.skip_after_ra = 4;
    cfg.kernel_h = cfg.kernel_w = 5;
  } else {
    throw ConfigError("unknown model config preset '" + f.config + "'");
  }
  if (f.window_k > 0) cfg.window_k = f.window_k;
  if (f.channels > 0) cfg.channels = f.channels;
  if (f.blocks > 0) cfg.res_blocks = f.blocks;
  if (!f.ra_positions.empty()) {
    cfg.ra_positions.clear();
    if (f.ra_positions != "none") {
      std::stringstream ss(f.ra_positions);
      std::string tok;
      while (std::getline(ss, tok, ','))
        cfg.ra_positions.push_back(std::stoi(tok));
    }
    if (cfg.skip_after_ra > static_cast<int>(cfg.ra_positions.size()))
      cfg.skip_after_ra = static_cast<int>(cfg.ra_positions.size());
  }
  if (f.skip_after_ra >= 0) cfg.skip_after_ra = f.skip_after_ra;
  if (f.kernel_size > 0) cfg.kernel_h = cfg.kernel_w = f.kernel_size;
  if (f.threshold >= 0) cfg.threshold = f.threshold;
  cfg.baseline_tkpcn = f.baseline;
  cfg.validate();
  return cfg;
}

Scene resolve_scene(const GenDataArgs& a) {
  Scene s = a.scene_json.empty() ? scene_preset(a.scene, a.seed)
                                 : scene_from_json_file(a.scene_json);
  if (a.scene_json.empty()) {
    // preset geometry scales with the requested canvas
    const double fx = static_cast<double>(a.width) / s.width;
    for (auto& l : s.layers) {
      l.cx *= fx; l.cy *= fx; l.half_w *= fx; l.half_h *= fx;
      l.vx *= fx; l.vy *= fx; l.tex_scale *= fx;
    }
    s.width = a.width;
    s.height = a.height;
    s.frame_count = a.frames;
    s.sigma_s = a.sigma_s;
    s.p_ff = a.firefly_p;
    s.i_ff = a.firefly_i;
    s.seed = a.seed;
  }
  return s;
}

int cmd_gen_data(const GenDataArgs& a) {
  if (a.spp < 1) throw CLI::ValidationError("--spp must be >= 1");
  Scene scene = resolve_scene(a);
  std::vector<int> offsets;
  for (int o = -a.window_k; o <= a.window_k; ++o)
    if (o != 0) offsets.push_back(o);

  if (a.sequence) {
    std::vector<FrameData> frames;
    for (int t = 0; t < scene.frame_count; ++t)
      frames.push_back(
          render_frame(scene, t, a.spp, rng::hash2(a.seed, 0x5E9), offsets));
    sequence_write(frames, a.out, scene.name, a.spp);
    if (a.png)
      for (int t = 0; t < scene.frame_count; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "f%04d.png", t);
        write_png((fs::path(a.out) / name).string(),
                  frames[static_cast<std::size_t>(t)].rgb);
      }
    std::printf("wrote %d frames to %s\n", scene.frame_count, a.out.c_str());
    return 0;
  }

  std::vector<std::string> pool = all_noise_pair_labels();
  if (!a.pairs.empty()) {
    pool.clear();
    std::stringstream ss(a.pairs);
    std::string tok;
    while (std::getline(ss, tok, ',')) pool.push_back(tok);
  }
  std::vector<NoisePair> pairs;
  for (const auto& label : pool)
    pairs.push_back(noise_pair_from_label(label, a.spp));

  rng::Stream pair_stream(rng::hash2(a.seed, 0x9A175));
  std::vector<TrainSample> samples;
  for (int c = a.window_k; c < scene.frame_count - a.window_k; ++c) {
    const NoisePair& pair = pairs[pair_stream.next_u64() % pairs.size()];
    samples.push_back(make_sequence(scene, c, a.window_k, pair,
                                    rng::hash3(a.seed, 0xDA7A,
                                               static_cast<std::uint64_t>(c))));
  }
  DatasetWriteOptions opts;
  opts.tile = a.tile;
  dataset_write(samples, a.out, a.window_k, opts);
  // report the on-disk sample count (tiling multiplies windows)
  auto written = dataset_read(a.out);
  if (a.png) {
    for (std::size_t i = 0; i < written.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "s%04zu", i);
      const fs::path sdir = fs::path(a.out) / name;
      write_png((sdir / "input.png").string(),
                slice(written[i].frames[written[i].frames.size() / 2], 0, 0, 3));
      write_png((sdir / "target.png").string(), written[i].target);
      write_png((sdir / "gt.png").string(), written[i].gt_center);
    }
  }
  std::printf("wrote %zu samples to %s\n", written.size(), a.out.c_str());
  return 0;
}

LossConfig make_loss_config(const std::string& kind, double eps, double lc,
                            double lp, double lg) {
  LossConfig cfg;
  if (kind == "smape")
    cfg.base = BaseLoss::Smape;
  else if (kind == "l1")
    cfg.base = BaseLoss::L1;
  else
    throw ConfigError("unknown loss '" + kind + "'");
  cfg.smape_eps = eps;
  cfg.lambda_center = lc;
  cfg.lambda_pair = lp;
  cfg.lambda_global = lg;
  return cfg;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"spatio-temporal kernel-predictive Monte Carlo denoiser", "ravg"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // ---- gen-data -------------------------------------------------------------
  GenDataArgs g;
  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset or sequence");
  gen->add_option("--scene", g.scene,
                  "scene preset (pan-checker, rot-disks, tex-quads, static-checker)")
      ->capture_default_str();
  gen->add_option("--scene-json", g.scene_json, "scene description file (overrides --scene)")
      ->capture_default_str();
  gen->add_option("--out", g.out, "output directory")->required();
  gen->add_option("--frames", g.frames, "frames to render")->capture_default_str();
  gen->add_option("--spp", g.spp, "samples per pixel of the 'noisy' level")
      ->capture_default_str();
  gen->add_option("--width", g.width, "frame width")->capture_default_str();
  gen->add_option("--height", g.height, "frame height")->capture_default_str();
  gen->add_option("--k", g.window_k, "temporal window half-size")->capture_default_str();
  gen->add_option("--tile", g.tile, "training tile size (0 disables tiling)")
      ->capture_default_str();
  gen->add_option("--seed", g.seed, "generator seed")->capture_default_str();
  gen->add_option("--pairs", g.pairs,
                  "comma list restricting the noise pairs (default: all five)")
      ->capture_default_str();
  gen->add_option("--sigma-s", g.sigma_s, "shading noise level")->capture_default_str();
  gen->add_option("--firefly-p", g.firefly_p, "firefly probability per sample")
      ->capture_default_str();
  gen->add_option("--firefly-i", g.firefly_i, "firefly intensity")->capture_default_str();
  gen->add_flag("--sequence", g.sequence, "write an inference sequence instead of a dataset");
  gen->add_flag("--png", g.png, "write 8-bit sRGB previews");

  // ---- train ----------------------------------------------------------------
  struct {
    std::string data, val, out, resume, ablate;
    int steps = 2000, batch = 2, val_every = 100;
    double lr = 1e-3, phase2_frac = 0.2, clip_norm = 10.0;
    std::uint64_t seed = 1;
    std::string loss = "smape";
    double smape_eps = 1e-2, lambda_center = 1.0, lambda_pair = 1.0,
           lambda_global = 0.0;
  } t;
  ModelFlags tm;
  auto* train_cmd = app.add_subcommand("train", "train a denoiser");
  train_cmd->add_option("--data", t.data, "training dataset directory")->required();
  train_cmd->add_option("--val", t.val, "validation dataset directory")->required();
  train_cmd->add_option("--out", t.out, "output directory (checkpoints, log)")->required();
  train_cmd->add_option("--steps", t.steps, "total optimization steps")->capture_default_str();
  train_cmd->add_option("--batch", t.batch, "batch size")->capture_default_str();
  train_cmd->add_option("--lr", t.lr, "step size")->capture_default_str();
  train_cmd->add_option("--val-every", t.val_every, "validation cadence")->capture_default_str();
  train_cmd->add_option("--phase2-frac", t.phase2_frac,
                        "fraction of steps post-trained with the global term")
      ->capture_default_str();
  train_cmd->add_option("--clip-norm", t.clip_norm, "global gradient-norm clip")
      ->capture_default_str();
  train_cmd->add_option("--seed", t.seed, "training seed")->capture_default_str();
  train_cmd->add_option("--loss", t.loss, "base loss (smape, l1)")->capture_default_str();
  train_cmd->add_option("--smape-eps", t.smape_eps, "smape epsilon")->capture_default_str();
  train_cmd->add_option("--lambda-center", t.lambda_center, "center term weight")
      ->capture_default_str();
  train_cmd->add_option("--lambda-pair", t.lambda_pair, "pair term weight")
      ->capture_default_str();
  train_cmd->add_option("--lambda-global", t.lambda_global,
                        "combined-output term weight in phase 1")
      ->capture_default_str();
  train_cmd->add_option("--resume", t.resume, "checkpoint directory to resume from")
      ->capture_default_str();
  train_cmd->add_option("--ablate", t.ablate,
                        "run the ablation harness instead (ra-vs-tkpcn)")
      ->capture_default_str();
  train_cmd->add_option("--config", tm.config, "model preset (desk-tiny, paper)")
      ->capture_default_str();
  train_cmd->add_option("--window-k", tm.window_k, "override: window half-size")
      ->capture_default_str();
  train_cmd->add_option("--channels", tm.channels, "override: network width")
      ->capture_default_str();
  train_cmd->add_option("--blocks", tm.blocks, "override: residual blocks")
      ->capture_default_str();
  train_cmd->add_option("--ra-positions", tm.ra_positions,
                        "override: comma list of RA positions (or 'none')")
      ->capture_default_str();
  train_cmd->add_option("--skip-after-ra", tm.skip_after_ra,
                        "override: embedding skips after the first n RA blocks")
      ->capture_default_str();
  train_cmd->add_option("--kernel-size", tm.kernel_size, "override: kernel Kh=Kw")
      ->capture_default_str();
  train_cmd->add_option("--threshold", tm.threshold, "override: kernel threshold t")
      ->capture_default_str();
  train_cmd->add_flag("--baseline", tm.baseline, "build the tKPCN baseline");

  // ---- denoise ----------------------------------------------------------------
  struct {
    std::string checkpoint, input, out, aov;
    int passes = 1;
    double kernel_threshold = -1.0;
    bool png = false;
  } d;
  auto* den = app.add_subcommand("denoise", "denoise a rendered sequence");
  den->add_option("--checkpoint", d.checkpoint, "checkpoint directory")->required();
  den->add_option("--input", d.input, "input sequence directory")->required();
  den->add_option("--out", d.out, "output directory")->required();
  den->add_option("--passes", d.passes, "denoising passes (temporal range extension)")
      ->capture_default_str();
  den->add_option("--kernel-threshold", d.kernel_threshold,
                  "kernel threshold t (default: checkpoint value)")
      ->capture_default_str();
  den->add_option("--aov", d.aov,
                  "auxiliary buffer stream (RTF, one record per frame) denoised "
                  "with the RGB kernels")
      ->capture_default_str();
  den->add_flag("--png", d.png, "write 8-bit sRGB previews");

  // ---- stats ------------------------------------------------------------------
  struct {
    std::string checkpoint, input, out;
    double kernel_threshold = -1.0;
    bool contrib = false;
    bool png = false;
  } st;
  auto* stats = app.add_subcommand("stats", "per-frame kernel weight breakdown");
  stats->add_option("--checkpoint", st.checkpoint, "checkpoint directory")->required();
  stats->add_option("--input", st.input, "input sequence directory")->required();
  stats->add_option("--out", st.out, "output directory")->required();
  stats->add_option("--kernel-threshold", st.kernel_threshold,
                    "kernel threshold t (default: checkpoint value)")
      ->capture_default_str();
  stats->add_flag("--contrib", st.contrib, "write per-frame contribution images");
  stats->add_flag("--png", st.png, "write contribution previews");

  // ---- metrics ----------------------------------------------------------------
  struct {
    std::string a, b;
    std::string record_a = "rgb", record_b = "rgb";
    double peak = 1.0;
  } mt;
  auto* met = app.add_subcommand("metrics", "PSNR/SSIM between two RTF images");
  met->add_option("--a", mt.a, "first RTF file")->required();
  met->add_option("--b", mt.b, "second RTF file")->required();
  met->add_option("--record-a", mt.record_a, "record name in the first file")
      ->capture_default_str();
  met->add_option("--record-b", mt.record_b, "record name in the second file")
      ->capture_default_str();
  met->add_option("--peak", mt.peak, "dynamic range peak")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or the error
    return rc == 0 ? 0 : 1;     // usage errors are exit 1
  }

  if (gen->parsed()) return cmd_gen_data(g);

  if (train_cmd->parsed()) {
    if (t.steps <= 0) throw CLI::ValidationError("--steps must be positive");
    auto data = dataset_read(t.data);
    auto val = dataset_read(t.val);
    TrainConfig cfg;
    cfg.steps = t.steps;
    cfg.batch = t.batch;
    cfg.lr = t.lr;
    cfg.val_every = t.val_every;
    cfg.phase2_frac = t.phase2_frac;
    cfg.clip_norm = t.clip_norm;
    cfg.seed = t.seed;
    cfg.out_dir = t.out;
    cfg.loss = make_loss_config(t.loss, t.smape_eps, t.lambda_center, t.lambda_pair,
                                t.lambda_global);

    if (!t.ablate.empty()) {
      if (t.ablate != "ra-vs-tkpcn")
        throw ConfigError("unknown ablation '" + t.ablate + "'");
      ModelConfig ra_cfg = resolve_model_config(tm);
      ModelFlags tk_flags = tm;
      tk_flags.baseline = true;
      ModelConfig tk_cfg = resolve_model_config(tk_flags);
      LossConfig temporal = cfg.loss;
      LossConfig spatial = cfg.loss;
      spatial.lambda_center = 0;
      spatial.lambda_pair = 0;
      spatial.lambda_global = 1;
      auto rows = ablate({{"ra+temporal", ra_cfg, temporal},
                          {"ra+spatial", ra_cfg, spatial},
                          {"tkpcn+temporal", tk_cfg, temporal},
                          {"tkpcn+spatial", tk_cfg, spatial}},
                         data, val, cfg);
      fs::create_directories(t.out);
      const std::string table = format_ablation_table(rows);
      {
        std::ofstream os(fs::path(t.out) / "ablation.txt");
        os << table;
      }
      json j = json::array();
      for (const auto& r : rows)
        j.push_back({{"name", r.name},
                     {"avg", r.avg},
                     {"max", r.max},
                     {"psnr", r.psnr},
                     {"ssim", r.ssim}});
      std::ofstream os(fs::path(t.out) / "ablation.json");
      os << j.dump(2) << "\n";
      std::printf("%s", table.c_str());
      return 0;
    }

    ModelT<float> model;
    OptimState resume_state;
    const OptimState* resume_ptr = nullptr;
    if (!t.resume.empty()) {
      model = load_checkpoint(t.resume);
      ModelConfig requested = resolve_model_config(tm);
      if (requested.kernel_h != model.cfg.kernel_h ||
          requested.kernel_w != model.cfg.kernel_w ||
          requested.window_k != model.cfg.window_k ||
          requested.channels != model.cfg.channels ||
          requested.res_blocks != model.cfg.res_blocks)
        throw DataError("checkpoint topology does not match the requested config");
      resume_state = load_optim_state(t.resume);
      resume_ptr = &resume_state;
    } else {
      model = build_model<float>(resolve_model_config(tm), t.seed);
    }
    auto res = train(std::move(model), data, val, cfg, resume_ptr);
    std::printf("trained %d steps; best validation loss %.6f at step %d\n",
                res.optim.step, res.log.best_val_loss, res.log.best_step);
    return 0;
  }

  if (den->parsed()) {
    auto model = load_checkpoint(d.checkpoint);
    auto frames = sequence_read(d.input);
    if (static_cast<int>(frames.size()) < 1) throw DataError("empty sequence");
    if (static_cast<int>(frames.size()) < model.cfg.frames() &&
        frames.size() < 1)
      throw DataError("sequence shorter than the model window");
    std::vector<Tensor> aov;
    std::vector<Tensor>* aov_ptr = nullptr;
    if (!d.aov.empty()) {
      for (const auto& r : rtf_read(d.aov)) aov.push_back(raw_to_f32(r));
      if (aov.size() != frames.size())
        throw DataError("aov stream must have one record per frame");
      aov_ptr = &aov;
    }
    DenoiseOptions opts;
    opts.passes = d.passes;
    opts.threshold_override = d.kernel_threshold;
    opts.collect_stats = true;
    auto res = denoise_sequence(model, frames, opts, aov_ptr);
    fs::create_directories(d.out);
    std::ofstream metrics_file(fs::path(d.out) / "metrics.jsonl");
    for (std::size_t i = 0; i < res.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "denoised_%04zu.rtf", i);
      std::vector<RawTensor> records = {to_raw("rgb", res.frames[i])};
      if (aov_ptr) records.push_back(to_raw("aov", res.aov_frames[i]));
      rtf_write((fs::path(d.out) / name).string(), records);
      if (d.png) {
        std::snprintf(name, sizeof(name), "denoised_%04zu.png", i);
        write_png((fs::path(d.out) / name).string(), res.frames[i]);
      }
      if (frames[i].ground_truth.defined()) {
        const double p = psnr(res.frames[i], frames[i].ground_truth);
        json j;
        j["frame"] = i;
        j["psnr"] = std::isinf(p) ? json("inf") : json(p);
        j["ssim"] = ssim(res.frames[i], frames[i].ground_truth);
        j["frame_weights_avg"] = res.stats[i].avg;
        j["frame_weights_max"] = res.stats[i].max;
        metrics_file << j.dump() << "\n";
      }
    }
    std::printf("denoised %zu frames (%d pass%s) into %s\n", res.frames.size(),
                opts.passes, opts.passes == 1 ? "" : "es", d.out.c_str());
    return 0;
  }

  if (stats->parsed()) {
    auto model = load_checkpoint(st.checkpoint);
    auto frames = sequence_read(st.input);
    DenoiseOptions opts;
    opts.threshold_override = st.kernel_threshold;
    opts.collect_stats = true;
    opts.collect_contributions = st.contrib;
    auto res = denoise_sequence(model, frames, opts);
    fs::create_directories(st.out);
    std::ofstream out_file(fs::path(st.out) / "stats.jsonl");
    std::vector<double> avg_total(static_cast<std::size_t>(model.cfg.frames()), 0.0);
    for (std::size_t i = 0; i < res.stats.size(); ++i) {
      json j;
      j["frame"] = i;
      j["frame_weights_avg"] = res.stats[i].avg;
      j["frame_weights_max"] = res.stats[i].max;
      j["edge_clamped"] = static_cast<bool>(res.edge_clamped[i]);
      out_file << j.dump() << "\n";
      for (std::size_t f = 0; f < avg_total.size(); ++f)
        avg_total[f] += res.stats[i].avg[f];
      if (st.contrib) {
        char name[32];
        std::snprintf(name, sizeof(name), "contrib_%04zu.rtf", i);
        rtf_write((fs::path(st.out) / name).string(),
                  {to_raw("contrib", res.contributions[i])});
        if (st.png) {
          for (int f = 0; f < model.cfg.frames(); ++f) {
            std::snprintf(name, sizeof(name), "contrib_%04zu_t%d.png", i, f);
            const std::size_t H = res.contributions[i].dim(1),
                              W = res.contributions[i].dim(2);
            write_png((fs::path(st.out) / name).string(),
                      reshape(slice(res.contributions[i], 0,
                                    static_cast<std::size_t>(f), 1),
                              {H, W}));
          }
        }
      }
    }
    std::printf("per-frame average kernel mass over %zu outputs:", res.stats.size());
    for (double v : avg_total) std::printf(" %.4f", v / res.stats.size());
    std::printf("\n");
    return 0;
  }

  if (met->parsed()) {
    auto ra = rtf_read(mt.a);
    auto rb = rtf_read(mt.b);
    Tensor a = raw_to_f32(rtf_find(ra, mt.record_a));
    Tensor b = raw_to_f32(rtf_find(rb, mt.record_b));
    const double p = psnr(a, b, mt.peak);
    json j;
    j["psnr"] = std::isinf(p) ? json("inf") : json(p);
    j["ssim"] = ssim(a, b);
    std::printf("%s\n", j.dump().c_str());
    return 0;
  }
  return 0;
}

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Tensor buffers exceed the default mmap threshold; keep them on the heap
  // freelists so per-step allocations do not fault fresh pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
