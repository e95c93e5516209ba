// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Optimization loop: seeded batch sampling, temporal loss, moment-based
// (Adam-style) updates with global-norm clipping, a two-phase schedule that
// adds the downweighted global term for the final fraction of steps, and
// validation-based best-checkpoint selection. Batch-member gradients are
// accumulated in fixed sample order, so runs are bit-reproducible.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "ravg/loss.hpp"
#include "ravg/model.hpp"

namespace ravg {

struct TrainConfig {
  int steps = 2000;
  int batch = 2;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double clip_norm = 10.0;
  LossConfig loss;                     // phase-1 loss (lambda_global usually 0)
  double phase2_frac = 0.2;            // last fraction of steps post-trains
  double phase2_lambda_global = 0.1;
  int val_every = 100;
  std::uint64_t seed = 1;
  std::string out_dir;                 // empty: keep everything in memory
};

struct AggStat {
  double min = 0, avg = 0, max = 0;
};

struct ValMetrics {
  double loss = 0;
  AggStat psnr;      // denoised vs target (the paper's protocol)
  AggStat ssim;
  AggStat psnr_gt;   // denoised vs analytic ground truth
  AggStat ssim_gt;
  AggStat psnr_in_gt;  // noisy center input vs ground truth
  AggStat ssim_in_gt;
  std::vector<double> frame_weights_avg, frame_weights_max;
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0;
  TemporalLossTerms terms;
  int phase = 1;
};

struct TrainLog {
  std::vector<TrainLogEntry> steps;
  std::vector<std::pair<int, ValMetrics>> validations;
  int best_step = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Adam first/second moments, persisted alongside the "last" checkpoint so
// runs can resume with the step counter intact.
struct OptimState {
  int step = 0;
  std::vector<std::vector<float>> m, v;  // aligned with named_parameters()
};

struct TrainResult {
  ModelT<float> model;  // best-validation checkpoint
  ModelT<float> last;   // final-step parameters
  TrainLog log;
  OptimState optim;
};

ValMetrics validate(const ModelT<float>& model, const std::vector<TrainSample>& data,
                    const LossConfig& loss_cfg);

TrainResult train(ModelT<float> model, const std::vector<TrainSample>& data,
                  const std::vector<TrainSample>& val_data, const TrainConfig& cfg,
                  const OptimState* resume = nullptr);

void save_optim_state(const OptimState& st, const std::string& dir);
OptimState load_optim_state(const std::string& dir);

// --- ablation harness --------------------------------------------------------

struct AblationSpec {
  std::string name;
  ModelConfig model;
  LossConfig loss;  // "spatial" = global term only; "temporal" = pair terms
};

struct AblationRow {
  std::string name;
  std::vector<double> avg, max;  // per-frame kernel mass over the probe set
  double psnr = 0, ssim = 0;     // vs target on the probe set
};

std::vector<AblationRow> ablate(const std::vector<AblationSpec>& specs,
                                const std::vector<TrainSample>& train_data,
                                const std::vector<TrainSample>& probe,
                                const TrainConfig& cfg);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace ravg
