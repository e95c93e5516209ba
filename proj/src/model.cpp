// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0

#include "ravg/model.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ravg/rtf.hpp"

namespace ravg {

using nlohmann::json;
namespace fs = std::filesystem;

static constexpr int kCheckpointVersion = 1;

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["window_k"] = cfg.window_k;
  j["channels"] = cfg.channels;
  j["res_blocks"] = cfg.res_blocks;
  j["ra_positions"] = cfg.ra_positions;
  j["skip_after_ra"] = cfg.skip_after_ra;
  j["kernel_h"] = cfg.kernel_h;
  j["kernel_w"] = cfg.kernel_w;
  j["threshold"] = cfg.effective_threshold();
  j["baseline_tkpcn"] = cfg.baseline_tkpcn;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    cfg.window_k = j.at("window_k").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.res_blocks = j.at("res_blocks").get<int>();
    cfg.ra_positions = j.at("ra_positions").get<std::vector<int>>();
    cfg.skip_after_ra = j.at("skip_after_ra").get<int>();
    cfg.kernel_h = j.at("kernel_h").get<int>();
    cfg.kernel_w = j.at("kernel_w").get<int>();
    cfg.threshold = j.at("threshold").get<double>();
    cfg.baseline_tkpcn = j.at("baseline_tkpcn").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const ModelT<float>& model, const std::string& dir) {
  fs::create_directories(dir);
  auto params = model.named_parameters();
  json j;
  j["format"] = "ravg-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.cfg);
  std::vector<std::string> names;
  for (const auto& [name, t] : params) names.push_back(name);
  j["params"] = names;
  {
    std::ofstream os(fs::path(dir) / "model.json");
    if (!os) throw DataError("cannot write " + dir + "/model.json");
    os << j.dump(2) << "\n";
  }
  std::vector<RawTensor> records;
  records.reserve(params.size());
  for (const auto& [name, t] : params) records.push_back(to_raw(name, t));
  rtf_write((fs::path(dir) / "params.rtf").string(), records);
}

ModelT<float> load_checkpoint(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "model.json");
  if (!is) throw DataError("cannot open " + dir + "/model.json");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint json: ") + e.what());
  }
  if (j.value("format", "") != "ravg-checkpoint")
    throw DataError("not a ravg checkpoint: " + dir);
  if (j.value("version", 0) != kCheckpointVersion)
    throw DataError("unsupported checkpoint version in " + dir);
  ModelConfig cfg = config_from_json(j.at("config"));
  ModelT<float> model = build_model<float>(cfg, 0);
  auto records = rtf_read((fs::path(dir) / "params.rtf").string());
  auto params = model.named_parameters();
  const auto names = j.at("params").get<std::vector<std::string>>();
  if (names.size() != params.size())
    throw DataError("checkpoint parameter list does not match the topology");
  for (auto& [name, t] : params) {
    const RawTensor& r = rtf_find(records, name);
    if (r.shape != t.shape())
      throw DataError("checkpoint parameter '" + name + "' has shape " +
                      shape_str(r.shape) + ", expected " + shape_str(t.shape()));
    Tensor& dst = const_cast<Tensor&>(t);
    dst.values() = r.f32;
  }
  return model;
}

DenoiseResult denoise_sequence(const ModelT<float>& model,
                               const std::vector<FrameData>& frames,
                               const DenoiseOptions& opts,
                               const std::vector<Tensor>* aov) {
  if (frames.empty()) throw DataError("denoise_sequence: empty frame stream");
  if (opts.passes < 1) throw ConfigError("denoise_sequence: passes must be >= 1");
  if (aov && aov->size() != frames.size())
    throw DataError("denoise_sequence: aov stream length mismatch");
  const int k = model.cfg.window_k;
  const int n = static_cast<int>(frames.size());

  NoGradGuard ng;
  ForwardOptions fwd_opts;
  fwd_opts.threshold_override = opts.threshold_override;

  DenoiseResult res;
  res.edge_clamped.assign(frames.size(), false);

  std::vector<Tensor> rgb_cur, aov_cur;
  for (const auto& f : frames) rgb_cur.push_back(f.rgb);
  if (aov) aov_cur = *aov;

  for (int pass = 0; pass < opts.passes; ++pass) {
    std::vector<Tensor> rgb_next(frames.size());
    std::vector<Tensor> aov_next(frames.size());
    const bool last_pass = pass == opts.passes - 1;
    for (int c = 0; c < n; ++c) {
      std::vector<WindowSlot> slots;
      std::vector<const Tensor*> rgb_ptrs;
      bool clamped = false;
      for (int d = -k; d <= k; ++d) {
        int s = c + d;
        if (s < 0 || s >= n) {
          s = s < 0 ? 0 : n - 1;  // clamp to the nearest available frame
          clamped = true;
        }
        slots.push_back({&frames[static_cast<std::size_t>(s)], s - c});
        rgb_ptrs.push_back(&rgb_cur[static_cast<std::size_t>(s)]);
      }
      res.edge_clamped[static_cast<std::size_t>(c)] =
          res.edge_clamped[static_cast<std::size_t>(c)] || clamped;
      auto window = assemble_window(frames[static_cast<std::size_t>(c)], slots,
                                    &rgb_ptrs);
      auto out = forward(model, window, fwd_opts);
      rgb_next[static_cast<std::size_t>(c)] = out.denoised;
      if (aov) {
        // the aov stream passes the same warp/mix pipeline, then reuses the
        // predicted kernels
        std::vector<Tensor> aov_window;
        const Tensor& aov_center = aov_cur[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < slots.size(); ++i) {
          const Tensor& a = aov_cur[static_cast<std::size_t>(
              std::clamp(c + static_cast<int>(i) - k, 0, n - 1))];
          if (slots[i].offset == 0) {
            aov_window.push_back(a);
          } else {
            const Tensor& flow =
                frames[static_cast<std::size_t>(c)].flow_to.at(slots[i].offset);
            auto wa = backward_warp(a, flow);
            auto wal = backward_warp(slots[i].frame->albedo, flow);
            auto wn = backward_warp(slots[i].frame->normal, flow);
            auto conf = warp_confidence(wal.image, wn.image,
                                        frames[static_cast<std::size_t>(c)].albedo,
                                        frames[static_cast<std::size_t>(c)].normal,
                                        wa.oob_mask);
            aov_window.push_back(confidence_mix(wa.image, aov_center, conf));
          }
        }
        aov_next[static_cast<std::size_t>(c)] = apply_to_aov(out.kernels, aov_window);
      }
      if (last_pass && (opts.collect_stats || opts.collect_contributions)) {
        if (opts.collect_stats) res.stats.push_back(frame_weight_stats(out.kernels));
        if (opts.collect_contributions) {
          const std::size_t H = out.kernels.height(), W = out.kernels.width();
          const std::size_t tpf =
              static_cast<std::size_t>(out.kernels.kh) * out.kernels.kw;
          Tensor contrib = Tensor::zeros(
              {static_cast<std::size_t>(out.kernels.frames), H, W});
          for (int f = 0; f < out.kernels.frames; ++f)
            for (std::size_t p = 0; p < H * W; ++p) {
              float s = 0.f;
              for (std::size_t i = 0; i < tpf; ++i)
                s += out.kernels.weights
                         .values()[(static_cast<std::size_t>(f) * tpf + i) * H * W + p];
              contrib.data()[static_cast<std::size_t>(f) * H * W + p] = s;
            }
          res.contributions.push_back(contrib);
        }
      }
    }
    rgb_cur = std::move(rgb_next);
    if (aov) aov_cur = std::move(aov_next);
  }
  res.frames = std::move(rgb_cur);
  if (aov) res.aov_frames = std::move(aov_cur);
  return res;
}

}  // namespace ravg
