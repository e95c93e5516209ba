// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0

#include "ravg/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ravg/rng.hpp"
#include "ravg/rtf.hpp"
#include "ravg/thread_pool.hpp"

namespace ravg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Local {
  double x, y;
};

// world -> layer-local at frame t
Local to_local(const SceneLayer& l, double wx, double wy, int t) {
  const double cx = l.cx + l.vx * t;
  const double cy = l.cy + l.vy * t;
  const double a = -(l.angle0 + l.omega * t);
  const double dx = wx - cx, dy = wy - cy;
  return {dx * std::cos(a) - dy * std::sin(a), dx * std::sin(a) + dy * std::cos(a)};
}

// layer-local -> world at frame t
void to_world(const SceneLayer& l, double lx, double ly, int t, double& wx, double& wy) {
  const double a = l.angle0 + l.omega * t;
  const double rx = lx * std::cos(a) - ly * std::sin(a);
  const double ry = lx * std::sin(a) + ly * std::cos(a);
  wx = rx + l.cx + l.vx * t;
  wy = ry + l.cy + l.vy * t;
}

bool covers(const SceneLayer& l, const Local& p) {
  switch (l.kind) {
    case SceneLayer::Kind::Background: return true;
    case SceneLayer::Kind::Quad:
      return std::abs(p.x) <= l.half_w && std::abs(p.y) <= l.half_h;
    case SceneLayer::Kind::Disk:
      return p.x * p.x + p.y * p.y <= l.half_w * l.half_w;
  }
  return false;
}

double value_noise(std::uint64_t key, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double tx = x - fx, ty = y - fy;
  auto corner = [&](int dx, int dy) {
    return rng::uniform01(rng::hash3(key, static_cast<std::uint64_t>(
                                              static_cast<std::int64_t>(fx) + dx + (1 << 20)),
                                     static_cast<std::uint64_t>(
                                         static_cast<std::int64_t>(fy) + dy + (1 << 20))));
  };
  const double sx = tx * tx * (3 - 2 * tx), sy = ty * ty * (3 - 2 * ty);
  const double top = corner(0, 0) * (1 - sx) + corner(1, 0) * sx;
  const double bot = corner(0, 1) * (1 - sx) + corner(1, 1) * sx;
  return top * (1 - sy) + bot * sy;
}

// Albedo from the layer texture in local coordinates (paint is attached to
// the surface, so motion transports it exactly).
void layer_albedo(const Scene& scene, std::size_t layer_idx, const Local& p,
                  double rgb[3]) {
  const SceneLayer& l = scene.layers[layer_idx];
  double u = 0.0;
  switch (l.texture) {
    case SceneLayer::Texture::Gradient: {
      const double span = l.kind == SceneLayer::Kind::Background
                              ? static_cast<double>(scene.width)
                              : 2.0 * l.half_w;
      u = std::clamp(0.5 + p.x / span, 0.0, 1.0);
      break;
    }
    case SceneLayer::Texture::Checker: {
      const long ix = static_cast<long>(std::floor(p.x / l.tex_scale));
      const long iy = static_cast<long>(std::floor(p.y / l.tex_scale));
      u = ((ix + iy) & 1) ? 1.0 : 0.0;
      break;
    }
    case SceneLayer::Texture::NoiseTex:
      u = value_noise(rng::hash2(scene.seed, layer_idx * 7919 + 13), p.x / l.tex_scale,
                      p.y / l.tex_scale);
      break;
  }
  for (int c = 0; c < 3; ++c) rgb[c] = l.color_a[c] * (1 - u) + l.color_b[c] * u;
}

// Shading = albedo * brightness * baked local lighting; firefly expectation
// is folded in so the Monte Carlo estimator below stays unbiased.
void shade(const Scene& scene, std::size_t layer_idx, const Local& p, double rgb[3]) {
  const SceneLayer& l = scene.layers[layer_idx];
  double albedo[3];
  layer_albedo(scene, layer_idx, p, albedo);
  const double light =
      0.75 + 0.25 * std::sin(0.11 * p.x + 0.9 * static_cast<double>(layer_idx)) *
                 std::cos(0.09 * p.y - 0.4 * static_cast<double>(layer_idx));
  for (int c = 0; c < 3; ++c)
    rgb[c] = albedo[c] * l.brightness * light + scene.p_ff * scene.i_ff;
}

std::size_t top_layer(const Scene& scene, double wx, double wy, int t, Local& local) {
  for (std::size_t i = scene.layers.size(); i-- > 0;) {
    Local p = to_local(scene.layers[i], wx, wy, t);
    if (covers(scene.layers[i], p)) {
      local = p;
      return i;
    }
  }
  throw DataError("scene '" + scene.name + "' has no background layer");
}

}  // namespace

void eval_ground_truth(const Scene& scene, int t, Tensor& rgb, Tensor& albedo,
                       Tensor& normal) {
  const std::size_t H = static_cast<std::size_t>(scene.height);
  const std::size_t W = static_cast<std::size_t>(scene.width);
  rgb = Tensor::zeros({3, H, W});
  albedo = Tensor::zeros({3, H, W});
  normal = Tensor::zeros({3, H, W});
  parallel_for(H, [&](std::size_t y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double wx = static_cast<double>(x) + 0.5;
      const double wy = static_cast<double>(y) + 0.5;
      Local local;
      const std::size_t li = top_layer(scene, wx, wy, t, local);
      double s[3], a[3];
      shade(scene, li, local, s);
      layer_albedo(scene, li, local, a);
      for (std::size_t c = 0; c < 3; ++c) {
        rgb.data()[c * H * W + y * W + x] = static_cast<float>(s[c]);
        albedo.data()[c * H * W + y * W + x] = static_cast<float>(a[c]);
        normal.data()[c * H * W + y * W + x] =
            static_cast<float>(scene.layers[li].normal[c]);
      }
    }
  });
}

Tensor layer_ids(const Scene& scene, int t) {
  const std::size_t H = static_cast<std::size_t>(scene.height);
  const std::size_t W = static_cast<std::size_t>(scene.width);
  Tensor ids = Tensor::zeros({H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      Local local;
      ids.data()[y * W + x] = static_cast<float>(top_layer(
          scene, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, t, local));
    }
  return ids;
}

FrameData render_frame(const Scene& scene, int t, int spp, std::uint64_t realization,
                       const std::vector<int>& flow_offsets) {
  if (spp < 1) throw ConfigError("render_frame: spp must be >= 1");
  const std::size_t H = static_cast<std::size_t>(scene.height);
  const std::size_t W = static_cast<std::size_t>(scene.width);
  FrameData f;
  f.spp = spp;
  eval_ground_truth(scene, t, f.ground_truth, f.albedo, f.normal);
  f.rgb = Tensor::zeros({3, H, W});

  // light factor uniform in [1-a, 1+a] with a = sigma_s*sqrt(3); requires
  // sigma_s <= 1/sqrt(3) so samples stay nonnegative
  const double a = scene.sigma_s * std::sqrt(3.0);
  if (a > 1.0) throw ConfigError("scene sigma_s too large for a nonnegative estimator");
  const std::uint64_t key = rng::hash3(scene.seed, realization,
                                       static_cast<std::uint64_t>(t) + 0x5151);

  parallel_for(H, [&](std::size_t y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double wx = static_cast<double>(x) + 0.5;
      const double wy = static_cast<double>(y) + 0.5;
      Local local;
      const std::size_t li = top_layer(scene, wx, wy, t, local);
      double s[3];
      shade(scene, li, local, s);
      // the baked expectation includes the firefly term; samples realize it
      const double base[3] = {s[0] - scene.p_ff * scene.i_ff,
                              s[1] - scene.p_ff * scene.i_ff,
                              s[2] - scene.p_ff * scene.i_ff};
      double acc[3] = {0, 0, 0};
      const std::uint64_t pk = rng::hash2(key, y * W + x);
      for (int k = 0; k < spp; ++k) {
        const double u = rng::uniform01(rng::hash3(pk, static_cast<std::uint64_t>(k), 0));
        const double factor = 1.0 + a * (2.0 * u - 1.0);
        double ff = 0.0;
        if (scene.p_ff > 0.0 &&
            rng::uniform01(rng::hash3(pk, static_cast<std::uint64_t>(k), 1)) < scene.p_ff)
          ff = scene.i_ff;
        for (int c = 0; c < 3; ++c) acc[c] += base[c] * factor + ff;
      }
      for (std::size_t c = 0; c < 3; ++c)
        f.rgb.data()[c * H * W + y * W + x] =
            static_cast<float>(acc[c] / static_cast<double>(spp));
    }
  });

  for (int o : flow_offsets) {
    const int s_t = t + o;
    if (o == 0 || s_t < 0 || s_t >= scene.frame_count) continue;
    Tensor flow = Tensor::zeros({2, H, W});
    parallel_for(H, [&](std::size_t y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double wx = static_cast<double>(x) + 0.5;
        const double wy = static_cast<double>(y) + 0.5;
        Local local;
        const std::size_t li = top_layer(scene, wx, wy, t, local);
        double qx, qy;
        to_world(scene.layers[li], local.x, local.y, s_t, qx, qy);
        flow.data()[y * W + x] = static_cast<float>(qx - wx);
        flow.data()[H * W + y * W + x] = static_cast<float>(qy - wy);
      }
    });
    f.flow_to[o] = std::move(flow);
  }
  return f;
}

NoisePair noise_pair_from_label(const std::string& label, int base_spp) {
  const int half = static_cast<int>(std::floor(base_spp / std::exp(1.0)));
  auto level = [&](const std::string& name) -> int {
    if (name == "low") return 4;
    if (name == "half") return std::max(1, half);
    if (name == "noisy") return base_spp;
    if (name == "pseudo_ref") return 4096;
    throw ConfigError("unknown noise level '" + name + "'");
  };
  const auto arrow = label.find("->");
  if (arrow == std::string::npos)
    throw ConfigError("noise pair label must look like 'low->half'");
  NoisePair p;
  p.label = label;
  p.input_spp = level(label.substr(0, arrow));
  p.target_spp = level(label.substr(arrow + 2));
  if (p.input_spp >= p.target_spp)
    throw ConfigError("noise pair '" + label + "' does not denoise toward less noise");
  return p;
}

std::vector<std::string> all_noise_pair_labels() {
  return {"low->half", "low->noisy", "half->noisy", "noisy->pseudo_ref",
          "half->pseudo_ref"};
}

TrainSample make_sequence(const Scene& scene, int center_t, int k,
                          const NoisePair& pair, std::uint64_t seed) {
  if (center_t - k < 0 || center_t + k >= scene.frame_count)
    throw DataError("make_sequence: window around frame " + std::to_string(center_t) +
                    " exceeds the scene frame range");
  std::vector<int> offsets;
  for (int o = -k; o <= k; ++o)
    if (o != 0) offsets.push_back(o);

  std::vector<FrameData> frames;
  frames.reserve(static_cast<std::size_t>(2 * k + 1));
  for (int d = -k; d <= k; ++d) {
    const std::uint64_t realization = rng::hash3(seed, 0xA11CE, static_cast<std::uint64_t>(
                                                                    d + k));
    frames.push_back(render_frame(scene, center_t + d, pair.input_spp, realization,
                                  d == 0 ? offsets : std::vector<int>{}));
  }
  const FrameData& center = frames[static_cast<std::size_t>(k)];

  std::vector<WindowSlot> slots;
  for (int d = -k; d <= k; ++d)
    slots.push_back({&frames[static_cast<std::size_t>(d + k)], d});

  TrainSample sample;
  sample.frames = assemble_window(center, slots);
  // the target is a cleaner, independently seeded render of the center frame
  FrameData target = render_frame(scene, center_t, pair.target_spp,
                                  rng::hash3(seed, 0x7A46E7, 1));
  sample.target = target.rgb;
  sample.gt_center = center.ground_truth;
  sample.noise_pair = pair.label;
  sample.scene = scene.name;
  sample.seed = seed;
  sample.center_t = center_t;
  return sample;
}

// --- dataset persistence ----------------------------------------------------

namespace {

std::string offset_suffix(int o) {
  if (o == 0) return "0";
  return (o > 0 ? "+" : "") + std::to_string(o);
}

// Cover tiling: fixed stride with the last tile aligned to the far edge.
std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t tile) {
  std::vector<std::size_t> origins;
  for (std::size_t o = 0;; o += tile) {
    if (o + tile >= extent) {
      origins.push_back(extent - tile);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t n) {
  return slice(slice(t, 1, y0, n), 2, x0, n);
}

}  // namespace

void dataset_write(const std::vector<TrainSample>& samples, const std::string& dir,
                   int window_k, const DatasetWriteOptions& opts) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "ravg-dataset";
  manifest["version"] = 1;
  manifest["window_k"] = window_k;
  manifest["tile"] = opts.tile;
  json list = json::array();

  std::size_t out_idx = 0;
  auto write_one = [&](const TrainSample& s, int ty, int tx) {
    char name[32];
    std::snprintf(name, sizeof(name), "s%04zu", out_idx++);
    const fs::path sdir = fs::path(dir) / name;
    fs::create_directories(sdir);
    std::vector<RawTensor> records;
    const int T = static_cast<int>(s.frames.size());
    const std::size_t H = s.frames[0].dim(1), W = s.frames[0].dim(2);
    for (int i = 0; i < T; ++i) {
      const int o = i - T / 2;
      records.push_back(to_raw("input_t" + offset_suffix(o),
                               s.frames[static_cast<std::size_t>(i)]));
      if (o != 0) {
        // confidence channel persisted on its own as well
        records.push_back(to_raw(
            "conf_t" + offset_suffix(o),
            reshape(slice(s.frames[static_cast<std::size_t>(i)], 0, 9, 1), {H, W})));
      }
    }
    records.push_back(to_raw("target", s.target));
    records.push_back(to_raw("gt", s.gt_center));
    rtf_write((sdir / "sample.rtf").string(), records);

    json meta;
    meta["scene"] = s.scene;
    meta["seed"] = s.seed;
    meta["noise_pair"] = s.noise_pair;
    meta["center_t"] = s.center_t;
    meta["tile_origin"] = {ty, tx};
    {
      std::ofstream os(sdir / "sample.json");
      os << meta.dump(2) << "\n";
    }
    json entry = meta;
    entry["dir"] = name;
    list.push_back(entry);
  };

  for (const auto& s : samples) {
    if (opts.tile <= 0) {
      write_one(s, 0, 0);
      continue;
    }
    const std::size_t tile = static_cast<std::size_t>(opts.tile);
    const std::size_t H = s.frames[0].dim(1), W = s.frames[0].dim(2);
    if (H < tile || W < tile)
      throw ConfigError("tile size exceeds the frame size");
    for (std::size_t y0 : tile_origins(H, tile)) {
      for (std::size_t x0 : tile_origins(W, tile)) {
        TrainSample t = s;
        t.frames.clear();
        for (const auto& f : s.frames) t.frames.push_back(crop(f, y0, x0, tile));
        t.target = crop(s.target, y0, x0, tile);
        t.gt_center = crop(s.gt_center, y0, x0, tile);
        write_one(t, static_cast<int>(y0), static_cast<int>(x0));
      }
    }
  }
  manifest["samples"] = list;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw DataError("cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

std::vector<TrainSample> dataset_read(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw DataError("missing manifest.json in " + dir);
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "ravg-dataset")
    throw DataError(dir + " is not a ravg dataset");
  const int k = manifest.at("window_k").get<int>();
  std::vector<TrainSample> out;
  for (const auto& entry : manifest.at("samples")) {
    const fs::path sdir = fs::path(dir) / entry.at("dir").get<std::string>();
    auto records = rtf_read((sdir / "sample.rtf").string());
    TrainSample s;
    for (int o = -k; o <= k; ++o)
      s.frames.push_back(raw_to_f32(rtf_find(records, "input_t" + offset_suffix(o))));
    s.target = raw_to_f32(rtf_find(records, "target"));
    s.gt_center = raw_to_f32(rtf_find(records, "gt"));
    s.scene = entry.value("scene", "");
    s.seed = entry.value("seed", 0ull);
    s.noise_pair = entry.value("noise_pair", "");
    s.center_t = entry.value("center_t", 0);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("dataset " + dir + " has no samples");
  return out;
}

// --- sequence persistence ----------------------------------------------------

void sequence_write(const std::vector<FrameData>& frames, const std::string& dir,
                    const std::string& scene_name, int spp) {
  if (frames.empty()) throw DataError("sequence_write: no frames");
  fs::create_directories(dir);
  json j;
  j["format"] = "ravg-sequence";
  j["version"] = 1;
  j["frames"] = frames.size();
  j["scene"] = scene_name;
  j["spp"] = spp;
  j["height"] = frames[0].rgb.dim(1);
  j["width"] = frames[0].rgb.dim(2);
  {
    std::ofstream os(fs::path(dir) / "seq.json");
    if (!os) throw DataError("cannot write seq.json in " + dir);
    os << j.dump(2) << "\n";
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "f%04zu.rtf", i);
    std::vector<RawTensor> records;
    records.push_back(to_raw("rgb", frames[i].rgb));
    records.push_back(to_raw("albedo", frames[i].albedo));
    records.push_back(to_raw("normal", frames[i].normal));
    if (frames[i].ground_truth.defined())
      records.push_back(to_raw("gt", frames[i].ground_truth));
    for (const auto& [o, flow] : frames[i].flow_to)
      records.push_back(to_raw("flow_t" + offset_suffix(o), flow));
    rtf_write((fs::path(dir) / name).string(), records);
  }
}

std::vector<FrameData> sequence_read(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "seq.json");
  if (!is) throw DataError("missing seq.json in " + dir);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt seq.json: ") + e.what());
  }
  if (j.value("format", "") != "ravg-sequence")
    throw DataError(dir + " is not a ravg sequence");
  const std::size_t n = j.at("frames").get<std::size_t>();
  std::vector<FrameData> out;
  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "f%04zu.rtf", i);
    auto records = rtf_read((fs::path(dir) / name).string());
    FrameData f;
    f.rgb = raw_to_f32(rtf_find(records, "rgb"));
    f.albedo = raw_to_f32(rtf_find(records, "albedo"));
    f.normal = raw_to_f32(rtf_find(records, "normal"));
    f.spp = j.value("spp", 0);
    for (const auto& r : records) {
      if (r.name == "gt") f.ground_truth = raw_to_f32(r);
      if (r.name.rfind("flow_t", 0) == 0) {
        const int o = std::stoi(r.name.substr(6));
        f.flow_to[o] = raw_to_f32(r);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

// --- presets -----------------------------------------------------------------

Scene scene_preset(const std::string& name, std::uint64_t seed) {
  Scene s;
  s.name = name;
  s.seed = seed;
  SceneLayer bg;
  bg.kind = SceneLayer::Kind::Background;
  bg.texture = SceneLayer::Texture::Gradient;
  bg.color_a[0] = 0.15; bg.color_a[1] = 0.18; bg.color_a[2] = 0.30;
  bg.color_b[0] = 0.55; bg.color_b[1] = 0.45; bg.color_b[2] = 0.25;
  bg.normal[0] = 0; bg.normal[1] = 0; bg.normal[2] = 1;

  if (name == "pan-checker") {
    s.layers.push_back(bg);
    SceneLayer q1;
    q1.kind = SceneLayer::Kind::Quad;
    q1.texture = SceneLayer::Texture::Checker;
    q1.cx = 30; q1.cy = 40; q1.half_w = 22; q1.half_h = 16;
    q1.vx = 1.4; q1.vy = 0.4; q1.tex_scale = 6;
    q1.normal[0] = 0.28; q1.normal[1] = 0.0; q1.normal[2] = 0.96;
    s.layers.push_back(q1);
    SceneLayer q2;
    q2.kind = SceneLayer::Kind::Quad;
    q2.texture = SceneLayer::Texture::NoiseTex;
    q2.cx = 66; q2.cy = 60; q2.half_w = 16; q2.half_h = 20;
    q2.vx = -1.1; q2.vy = 0.2; q2.tex_scale = 5;
    q2.color_a[0] = 0.7; q2.color_a[1] = 0.6; q2.color_a[2] = 0.2;
    q2.color_b[0] = 0.2; q2.color_b[1] = 0.3; q2.color_b[2] = 0.6;
    q2.normal[0] = -0.2; q2.normal[1] = 0.1; q2.normal[2] = 0.9746794;
    s.layers.push_back(q2);
  } else if (name == "rot-disks") {
    bg.texture = SceneLayer::Texture::Checker;
    bg.tex_scale = 14;
    bg.vx = 0.3;
    s.layers.push_back(bg);
    SceneLayer d1;
    d1.kind = SceneLayer::Kind::Disk;
    d1.texture = SceneLayer::Texture::Checker;
    d1.cx = 36; d1.cy = 44; d1.half_w = 18; d1.tex_scale = 7;
    d1.omega = 0.12; d1.vx = 0.5;
    d1.color_a[0] = 0.85; d1.color_a[1] = 0.75; d1.color_a[2] = 0.3;
    d1.color_b[0] = 0.25; d1.color_b[1] = 0.2; d1.color_b[2] = 0.5;
    d1.normal[0] = 0.0; d1.normal[1] = 0.3; d1.normal[2] = 0.9539392;
    s.layers.push_back(d1);
    SceneLayer d2;
    d2.kind = SceneLayer::Kind::Disk;
    d2.texture = SceneLayer::Texture::NoiseTex;
    d2.cx = 64; d2.cy = 36; d2.half_w = 13; d2.tex_scale = 4;
    d2.omega = -0.2; d2.vy = 0.6;
    d2.color_a[0] = 0.3; d2.color_a[1] = 0.7; d2.color_a[2] = 0.5;
    d2.color_b[0] = 0.6; d2.color_b[1] = 0.2; d2.color_b[2] = 0.2;
    s.layers.push_back(d2);
  } else if (name == "tex-quads") {
    bg.texture = SceneLayer::Texture::NoiseTex;
    bg.tex_scale = 18;
    s.layers.push_back(bg);
    SceneLayer q1;
    q1.kind = SceneLayer::Kind::Quad;
    q1.texture = SceneLayer::Texture::NoiseTex;
    q1.cx = 40; q1.cy = 36; q1.half_w = 20; q1.half_h = 14;
    q1.vx = 1.8; q1.vy = -0.3; q1.tex_scale = 4;
    q1.color_a[0] = 0.75; q1.color_a[1] = 0.3; q1.color_a[2] = 0.3;
    q1.color_b[0] = 0.2; q1.color_b[1] = 0.5; q1.color_b[2] = 0.7;
    s.layers.push_back(q1);
    SceneLayer q2;
    q2.kind = SceneLayer::Kind::Quad;
    q2.texture = SceneLayer::Texture::Checker;
    q2.cx = 58; q2.cy = 64; q2.half_w = 15; q2.half_h = 15;
    q2.omega = 0.1; q2.tex_scale = 5;
    q2.color_a[0] = 0.7; q2.color_a[1] = 0.7; q2.color_a[2] = 0.65;
    q2.color_b[0] = 0.15; q2.color_b[1] = 0.25; q2.color_b[2] = 0.2;
    s.layers.push_back(q2);
  } else if (name == "static-checker") {
    s.layers.push_back(bg);
    SceneLayer q;
    q.kind = SceneLayer::Kind::Quad;
    q.texture = SceneLayer::Texture::Checker;
    q.cx = 42; q.cy = 44; q.half_w = 20; q.half_h = 18; q.tex_scale = 6;
    s.layers.push_back(q);
    SceneLayer d;
    d.kind = SceneLayer::Kind::Disk;
    d.texture = SceneLayer::Texture::Gradient;
    d.cx = 66; d.cy = 32; d.half_w = 12;
    d.color_a[0] = 0.8; d.color_a[1] = 0.5; d.color_a[2] = 0.2;
    d.color_b[0] = 0.3; d.color_b[1] = 0.4; d.color_b[2] = 0.7;
    s.layers.push_back(d);
  } else {
    throw ConfigError("unknown scene preset '" + name + "'");
  }
  return s;
}

namespace {

SceneLayer layer_from_json(const json& j) {
  SceneLayer l;
  const std::string kind = j.value("kind", "quad");
  if (kind == "background") l.kind = SceneLayer::Kind::Background;
  else if (kind == "quad") l.kind = SceneLayer::Kind::Quad;
  else if (kind == "disk") l.kind = SceneLayer::Kind::Disk;
  else throw ConfigError("scene json: unknown layer kind '" + kind + "'");
  const std::string tex = j.value("texture", "checker");
  if (tex == "gradient") l.texture = SceneLayer::Texture::Gradient;
  else if (tex == "checker") l.texture = SceneLayer::Texture::Checker;
  else if (tex == "noise") l.texture = SceneLayer::Texture::NoiseTex;
  else throw ConfigError("scene json: unknown texture '" + tex + "'");
  l.cx = j.value("cx", l.cx);
  l.cy = j.value("cy", l.cy);
  l.half_w = j.value("half_w", l.half_w);
  l.half_h = j.value("half_h", l.half_h);
  l.vx = j.value("vx", l.vx);
  l.vy = j.value("vy", l.vy);
  l.angle0 = j.value("angle0", l.angle0);
  l.omega = j.value("omega", l.omega);
  l.tex_scale = j.value("tex_scale", l.tex_scale);
  l.brightness = j.value("brightness", l.brightness);
  auto read3 = [&](const char* key, double* dst) {
    if (j.contains(key)) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 3) throw ConfigError(std::string("scene json: ") + key + " needs 3 values");
      for (int i = 0; i < 3; ++i) dst[i] = v[static_cast<std::size_t>(i)];
    }
  };
  read3("color_a", l.color_a);
  read3("color_b", l.color_b);
  read3("normal", l.normal);
  const double n = std::sqrt(l.normal[0] * l.normal[0] + l.normal[1] * l.normal[1] +
                             l.normal[2] * l.normal[2]);
  if (n < 1e-9) throw ConfigError("scene json: zero normal");
  for (double* v = l.normal; v != l.normal + 3; ++v) *v /= n;
  return l;
}

}  // namespace

Scene scene_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open scene file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("scene json parse error: ") + e.what());
  }
  Scene s;
  s.name = j.value("name", "custom");
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.frame_count = j.value("frames", s.frame_count);
  s.sigma_s = j.value("sigma_s", s.sigma_s);
  s.p_ff = j.value("firefly_p", s.p_ff);
  s.i_ff = j.value("firefly_i", s.i_ff);
  s.seed = j.value("seed", s.seed);
  if (!j.contains("layers") || j.at("layers").empty())
    throw ConfigError("scene json: at least one layer required");
  for (const auto& lj : j.at("layers")) s.layers.push_back(layer_from_json(lj));
  if (s.layers[0].kind != SceneLayer::Kind::Background)
    throw ConfigError("scene json: first layer must be the background");
  return s;
}

}  // namespace ravg
