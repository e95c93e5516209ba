// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0

#include "ravg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ravg/metrics.hpp"
#include "ravg/rng.hpp"
#include "ravg/rtf.hpp"

namespace ravg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<Tensor> rgb_of(const TrainSample& s) {
  std::vector<Tensor> rgb;
  rgb.reserve(s.frames.size());
  for (const auto& f : s.frames) rgb.push_back(slice(f, 0, 0, 3));
  return rgb;
}

void accumulate(AggStat& st, double v, bool first) {
  if (first) {
    st.min = st.max = v;
    st.avg = 0;
  }
  st.min = std::min(st.min, v);
  st.max = std::max(st.max, v);
  st.avg += v;
}

json val_to_json(int step, const ValMetrics& m) {
  json j;
  j["type"] = "val";
  j["step"] = step;
  j["loss"] = m.loss;
  j["psnr"] = {{"min", m.psnr.min}, {"avg", m.psnr.avg}, {"max", m.psnr.max}};
  j["ssim"] = {{"min", m.ssim.min}, {"avg", m.ssim.avg}, {"max", m.ssim.max}};
  j["psnr_gt"] = {{"min", m.psnr_gt.min}, {"avg", m.psnr_gt.avg}, {"max", m.psnr_gt.max}};
  j["ssim_gt"] = {{"min", m.ssim_gt.min}, {"avg", m.ssim_gt.avg}, {"max", m.ssim_gt.max}};
  j["psnr_input_gt"] = {{"min", m.psnr_in_gt.min},
                        {"avg", m.psnr_in_gt.avg},
                        {"max", m.psnr_in_gt.max}};
  j["frame_weights_avg"] = m.frame_weights_avg;
  j["frame_weights_max"] = m.frame_weights_max;
  return j;
}

// PSNR can be +inf for a perfect match; JSON-lines files carry "inf".
json finite_or_inf(double v) {
  if (std::isinf(v)) return json("inf");
  return json(v);
}

}  // namespace

ValMetrics validate(const ModelT<float>& model, const std::vector<TrainSample>& data,
                    const LossConfig& loss_cfg) {
  if (data.empty()) throw DataError("validate: empty dataset");
  NoGradGuard ng;
  ValMetrics out;
  std::vector<double> fw_avg, fw_max;
  bool first = true;
  for (const auto& s : data) {
    auto res = forward(model, s.frames);
    auto rgb = rgb_of(s);
    out.loss += static_cast<double>(
        temporal_loss(res.kernels, rgb, s.target, loss_cfg).item());
    accumulate(out.psnr, psnr(res.denoised, s.target), first);
    accumulate(out.ssim, ssim(res.denoised, s.target), first);
    accumulate(out.psnr_gt, psnr(res.denoised, s.gt_center), first);
    accumulate(out.ssim_gt, ssim(res.denoised, s.gt_center), first);
    auto center_rgb = slice(s.frames[s.frames.size() / 2], 0, 0, 3);
    accumulate(out.psnr_in_gt, psnr(center_rgb, s.gt_center), first);
    accumulate(out.ssim_in_gt, ssim(center_rgb, s.gt_center), first);
    auto st = frame_weight_stats(res.kernels);
    if (fw_avg.empty()) {
      fw_avg.assign(st.avg.size(), 0.0);
      fw_max.assign(st.max.size(), 0.0);
    }
    for (std::size_t i = 0; i < st.avg.size(); ++i) {
      fw_avg[i] += st.avg[i];
      fw_max[i] += st.max[i];
    }
    first = false;
  }
  const double n = static_cast<double>(data.size());
  out.loss /= n;
  for (AggStat* st : {&out.psnr, &out.ssim, &out.psnr_gt, &out.ssim_gt,
                      &out.psnr_in_gt, &out.ssim_in_gt})
    st->avg /= n;
  for (double& v : fw_avg) v /= n;
  for (double& v : fw_max) v /= n;
  out.frame_weights_avg = std::move(fw_avg);
  out.frame_weights_max = std::move(fw_max);
  return out;
}

TrainResult train(ModelT<float> model, const std::vector<TrainSample>& data,
                  const std::vector<TrainSample>& val_data, const TrainConfig& cfg,
                  const OptimState* resume) {
  if (data.empty() || val_data.empty())
    throw DataError("train: datasets must be nonempty");
  if (cfg.steps <= 0 || cfg.batch < 1)
    throw ConfigError("train: steps must be > 0 and batch >= 1");

  auto params = model.named_parameters();
  OptimState opt;
  if (resume) {
    opt = *resume;
    if (opt.m.size() != params.size())
      throw DataError("resume: optimizer state does not match the model");
  } else {
    opt.m.resize(params.size());
    opt.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      opt.m[i].assign(params[i].second.size(), 0.f);
      opt.v[i].assign(params[i].second.size(), 0.f);
    }
  }

  std::ofstream log_file;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    log_file.open(fs::path(cfg.out_dir) / "train_log.jsonl",
                  resume ? std::ios::app : std::ios::trunc);
    if (!log_file) throw DataError("cannot write the training log in " + cfg.out_dir);
  }

  TrainResult result;
  TrainLog& log = result.log;
  rng::Stream sampler(rng::hash2(cfg.seed, 0xBA7C4));
  // Resumed runs replay the sampler up to the stored step for continuity.
  for (int s = 0; s < opt.step; ++s)
    for (int b = 0; b < cfg.batch; ++b) sampler.next_u64();

  const int phase2_start =
      cfg.steps - static_cast<int>(std::floor(cfg.phase2_frac * cfg.steps));
  ModelT<float> best = model.clone();

  // Batch members run concurrently on model replicas with independent tapes;
  // member gradients are reduced into the master in fixed sample order, so
  // the result matches the sequential schedule bit for bit.
  std::vector<ModelT<float>> replicas;
  std::vector<std::vector<std::pair<std::string, Tensor>>> replica_params;
  for (int b = 0; b < cfg.batch; ++b) {
    replicas.push_back(model.clone());
    replica_params.push_back(replicas.back().named_parameters());
  }

  auto run_validation = [&](int step) {
    ValMetrics m = validate(model, val_data, cfg.loss);
    log.validations.emplace_back(step, m);
    if (m.loss < log.best_val_loss) {
      log.best_val_loss = m.loss;
      log.best_step = step;
      best = model.clone();
      if (!cfg.out_dir.empty())
        save_checkpoint(model, (fs::path(cfg.out_dir) / "best").string());
    }
    if (log_file) {
      json j = val_to_json(step, m);
      j["psnr"]["max"] = finite_or_inf(m.psnr.max);
      j["psnr_gt"]["max"] = finite_or_inf(m.psnr_gt.max);
      log_file << j.dump() << "\n";
      log_file.flush();
    }
  };

  for (int step = opt.step; step < cfg.steps; ++step) {
    const bool phase2 = step >= phase2_start;
    LossConfig loss_cfg = cfg.loss;
    if (phase2) loss_cfg.lambda_global = cfg.phase2_lambda_global;

    for (auto& [name, p] : params) const_cast<Tensor&>(p).clear_grad();

    std::vector<std::size_t> batch_idx(static_cast<std::size_t>(cfg.batch));
    for (auto& idx : batch_idx)
      idx = static_cast<std::size_t>(sampler.next_u64() % data.size());

    struct MemberOut {
      double loss = 0;
      TemporalLossTerms terms;
      std::string error;
    };
    std::vector<MemberOut> member(static_cast<std::size_t>(cfg.batch));
    parallel_for(static_cast<std::size_t>(cfg.batch), [&](std::size_t b) {
      try {
        for (std::size_t i = 0; i < params.size(); ++i) {
          Tensor& rp = const_cast<Tensor&>(replica_params[b][i].second);
          rp.values() = params[i].second.values();
          rp.clear_grad();
        }
        TapeT<float>::current().clear();
        const TrainSample& s = data[batch_idx[b]];
        auto res = forward(replicas[b], s.frames);
        auto loss =
            temporal_loss(res.kernels, rgb_of(s), s.target, loss_cfg, &member[b].terms);
        member[b].loss = static_cast<double>(loss.item());
        if (!std::isfinite(member[b].loss))
          throw NumericError("non-finite member loss");
        auto scaled = mul(loss, 1.0 / cfg.batch);
        backward(scaled);
      } catch (const std::exception& e) {
        member[b].error = e.what();
        TapeT<float>::current().clear();
      }
    });

    double loss_acc = 0;
    TemporalLossTerms terms_acc;
    for (int b = 0; b < cfg.batch; ++b) {
      const MemberOut& m = member[static_cast<std::size_t>(b)];
      if (!m.error.empty()) {
        std::ostringstream os;
        os << "non-finite loss at step " << step << " (sample " << batch_idx[static_cast<std::size_t>(b)]
           << ", center=" << m.terms.center << ", pair_a=" << m.terms.pair_a
           << ", pair_b=" << m.terms.pair_b << ", global=" << m.terms.global
           << "): " << m.error;
        throw NumericError(os.str());
      }
      loss_acc += m.loss / cfg.batch;
      terms_acc.center += m.terms.center / cfg.batch;
      terms_acc.pair_a += m.terms.pair_a / cfg.batch;
      terms_acc.pair_b += m.terms.pair_b / cfg.batch;
      terms_acc.global += m.terms.global / cfg.batch;
    }
    // fixed-order reduction of member gradients into the master buffers
    for (int b = 0; b < cfg.batch; ++b) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& rp = replica_params[static_cast<std::size_t>(b)][i].second;
        if (!rp.has_grad()) continue;
        Tensor& p = const_cast<Tensor&>(params[i].second);
        auto& dst = p.grad_buffer();
        const auto& src = rp.grad();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }

    // global-norm gradient clipping
    double norm_sq = 0;
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (float g : p.grad()) norm_sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(norm_sq);
    const float scale =
        norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.f;

    ++opt.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, opt.step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, opt.step);
    const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
    const float lr = static_cast<float>(cfg.lr * std::sqrt(bc2) / bc1);
    const float eps = static_cast<float>(cfg.adam_eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = const_cast<Tensor&>(params[i].second);
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      float* pv = p.data();
      float* pm = opt.m[i].data();
      float* pvv = opt.v[i].data();
      for (std::size_t j = 0; j < g.size(); ++j) {
        const float gj = g[j] * scale;
        pm[j] = b1 * pm[j] + (1.f - b1) * gj;
        pvv[j] = b2 * pvv[j] + (1.f - b2) * gj * gj;
        pv[j] -= lr * pm[j] / (std::sqrt(pvv[j]) + eps);
      }
    }

    log.steps.push_back({step, loss_acc, terms_acc, phase2 ? 2 : 1});
    if (log_file) {
      json j;
      j["type"] = "step";
      j["step"] = step;
      j["loss"] = loss_acc;
      j["center"] = terms_acc.center;
      j["pair_a"] = terms_acc.pair_a;
      j["pair_b"] = terms_acc.pair_b;
      j["global"] = terms_acc.global;
      j["phase"] = phase2 ? 2 : 1;
      log_file << j.dump() << "\n";
    }

    if ((step + 1) % cfg.val_every == 0 || step + 1 == cfg.steps)
      run_validation(step + 1);
  }

  if (!cfg.out_dir.empty()) {
    const std::string last_dir = (fs::path(cfg.out_dir) / "last").string();
    save_checkpoint(model, last_dir);
    save_optim_state(opt, last_dir);
  }
  result.last = model;
  result.model = best;
  result.optim = opt;
  return result;
}

void save_optim_state(const OptimState& st, const std::string& dir) {
  fs::create_directories(dir);
  std::vector<RawTensor> records;
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    records.push_back(to_raw("m." + std::to_string(i),
                             Tensor::from({st.m[i].size()}, st.m[i])));
    records.push_back(to_raw("v." + std::to_string(i),
                             Tensor::from({st.v[i].size()}, st.v[i])));
  }
  rtf_write((fs::path(dir) / "optim.rtf").string(), records);
  json j;
  j["step"] = st.step;
  j["params"] = st.m.size();
  std::ofstream os(fs::path(dir) / "state.json");
  os << j.dump(2) << "\n";
}

OptimState load_optim_state(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "state.json");
  if (!is) throw DataError("missing optimizer state in " + dir);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt optimizer state: ") + e.what());
  }
  OptimState st;
  st.step = j.at("step").get<int>();
  const std::size_t n = j.at("params").get<std::size_t>();
  auto records = rtf_read((fs::path(dir) / "optim.rtf").string());
  for (std::size_t i = 0; i < n; ++i) {
    st.m.push_back(rtf_find(records, "m." + std::to_string(i)).f32);
    st.v.push_back(rtf_find(records, "v." + std::to_string(i)).f32);
  }
  return st;
}

std::vector<AblationRow> ablate(const std::vector<AblationSpec>& specs,
                                const std::vector<TrainSample>& train_data,
                                const std::vector<TrainSample>& probe,
                                const TrainConfig& cfg) {
  if (specs.size() < 2)
    throw ConfigError("ablate: at least two configurations are required");
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    TrainConfig c = cfg;
    c.loss = spec.loss;
    c.out_dir = cfg.out_dir.empty()
                    ? ""
                    : (fs::path(cfg.out_dir) / spec.name).string();
    auto model = build_model<float>(spec.model, cfg.seed);
    auto res = train(std::move(model), train_data, probe, c);
    ValMetrics m = validate(res.model, probe, spec.loss);
    AblationRow row;
    row.name = spec.name;
    row.avg = m.frame_weights_avg;
    row.max = m.frame_weights_max;
    row.psnr = m.psnr.avg;
    row.ssim = m.ssim.avg;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  if (rows.empty()) return "";
  const std::size_t T = rows[0].avg.size();
  os << "                      ";
  const int k = static_cast<int>(T) / 2;
  for (int f = -k; f <= k; ++f) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%8d", f);
    os << buf;
  }
  os << "\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s avg ", r.name.c_str());
    os << line;
    for (double v : r.avg) {
      std::snprintf(line, sizeof(line), "%8.4f", v);
      os << line;
    }
    std::snprintf(line, sizeof(line), "   psnr %.2f ssim %.4f", r.psnr, r.ssim);
    os << line << "\n";
    std::snprintf(line, sizeof(line), "%-16s max ", "");
    os << line;
    for (double v : r.max) {
      std::snprintf(line, sizeof(line), "%8.4f", v);
      os << line;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace ravg
