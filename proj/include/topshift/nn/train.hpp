#pragma once

// Training loop: Adam with linear warmup then inverse-sqrt decay, label
// smoothing, dropout, per-epoch greedy validation EM, and averaging of the
// best checkpoints.

#include <cstdint>
#include <map>
#include <ostream>

#include "topshift/nn/net.hpp"

namespace topshift::nn {

struct TrainConfig {
  int epochs = 90;
  double lr_peak = 5e-4;
  double lr_init = 1e-7;   // warmup start
  double lr_floor = 1e-9;  // inverse-sqrt minimum
  int warmup_steps = 4000;
  int batch_tokens = 3584;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  int average_checkpoints = 3;
  double early_stop_em = 0.0;  // 0 disables; stop once val EM reaches this
  std::uint64_t seed = 42;

  // Desk-scale preset: same optimizer, sized for minutes-scale CPU runs.
  static TrainConfig desk();
  // Applies key=value overrides (same keys for model hyperparameters).
  static void apply(const std::map<std::string, std::string>& kv, ModelConfig& mc,
                    TrainConfig& tc);
};

// Linear ramp lr_init -> lr_peak over warmup_steps (hits lr_peak exactly at
// step == warmup_steps), then lr_peak * sqrt(warmup/step), floored.
double scheduled_lr(const TrainConfig& config, int step);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_em = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;  // averaged over the best checkpoints
  std::vector<EpochLog> log;
  double best_val_em = 0.0;
};

struct EmptyCorpusError : Error {
  using Error::Error;
};

TrainResult train(const Dataset& train_set, const Dataset& valid_set, SystemKind system,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  std::ostream* log_stream = nullptr);

// Greedy-decoding exact match of `params` against `dataset` golds; decode
// failures count as misses.
double validation_exact_match(const ModelParams& params, const Dataset& dataset);

}  // namespace topshift::nn
