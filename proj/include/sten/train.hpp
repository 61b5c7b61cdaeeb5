#pragma once

#include <cstdint>
#include <ostream>
#include <span>

#include "sten/data.hpp"
#include "sten/eval.hpp"
#include "sten/model.hpp"
#include "sten/params.hpp"

namespace sten {

struct TrainConfig {
  std::size_t batch_size = 256;
  double base_lr = 0.001;
  double peak_lr = 0.015;
  std::size_t warmup_steps = 1000;
  std::size_t total_steps = 5000;
  double accumulator_decay = 0.9999;  // rho
  double eps = 1e-6;
  std::uint64_t seed = 1;
  std::size_t eval_interval = 1000;  // 0 disables periodic evaluation

  void validate() const;
};

/// Linear from base_lr at step 0 to peak_lr at warmup_steps, constant after.
double warmup_lr(const TrainConfig& config, std::size_t step);

/// One optimizer update over every parameter: acc <- rho * acc + g^2,
/// theta <- theta - lr * g / (sqrt(acc) + eps). Elementwise, so the result
/// does not depend on registration order. Throws NumericError naming the
/// parameter on a non-finite gradient.
void adagrad_decay_step(ParameterStore& params, double lr, double rho, double eps);

/// Mean binary cross-entropy of probability predictions (same formula as
/// logloss_metric, clamped internally).
double bce_loss(std::span<const double> predictions, std::span<const int> labels);

struct TrainResult {
  std::size_t steps = 0;
  double final_loss = 0.0;
};

/// Deterministic loop: shuffle once per epoch with a single seeded stream,
/// walk contiguous batches, skip size-1 remainders (batch norm needs two
/// rows). Logs `step<TAB>lr<TAB>loss` per step to `metrics`, appending
/// `<TAB>val_auc` every eval_interval steps and at the end when `val` is
/// non-empty. Throws ConfigError when train has fewer than two samples.
TrainResult train_loop(StENModel& model, std::span<const Sample> train,
                       std::span<const Sample> val, const TrainConfig& config,
                       std::ostream* metrics);

}  // namespace sten
