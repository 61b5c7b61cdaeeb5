#include "sten/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "sten/errors.hpp"
#include "sten/graph.hpp"
#include "sten/rng.hpp"

namespace sten {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
  if (!(base_lr <= peak_lr)) throw ConfigError("base_lr must not exceed peak_lr");
  if (warmup_steps > total_steps) throw ConfigError("warmup_steps must not exceed total_steps");
  if (!(accumulator_decay > 0.0) || accumulator_decay > 1.0) {
    throw ConfigError("accumulator_decay must be in (0,1]");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
}

double warmup_lr(const TrainConfig& config, std::size_t step) {
  if (step >= config.warmup_steps) return config.peak_lr;
  return config.base_lr + (config.peak_lr - config.base_lr) * static_cast<double>(step) /
                              static_cast<double>(config.warmup_steps);
}

void adagrad_decay_step(ParameterStore& params, double lr, double rho, double eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      double g = p.gradient[j];
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient for " + p.name);
      }
      double acc = rho * p.accumulator[j] + g * g;
      p.accumulator[j] = acc;
      p.value[j] -= lr * g / (std::sqrt(acc) + eps);
    }
  }
}

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  return logloss_metric(predictions, labels);
}

TrainResult train_loop(StENModel& model, std::span<const Sample> train,
                       std::span<const Sample> val, const TrainConfig& config,
                       std::ostream* metrics) {
  config.validate();
  if (train.size() < 2) {
    throw ConfigError("training needs at least 2 samples, got " + std::to_string(train.size()));
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  batch.reserve(config.batch_size);

  TrainResult result;
  std::size_t step = 0;
  while (step < config.total_steps) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && step < config.total_steps;
         start += config.batch_size) {
      std::size_t count = std::min(config.batch_size, order.size() - start);
      if (count < 2) continue;  // batch norm needs two rows
      batch.clear();
      for (std::size_t k = 0; k < count; ++k) batch.push_back(train[order[start + k]]);

      PaddedBatch pb = encode_batch(batch, model.config());
      Graph g;
      ForwardOutputs fo = model.forward(g, pb, BnMode::Train);
      Var loss = g.bce_with_logits(fo.logits, pb.labels);
      model.params().zero_gradients();
      g.backward(loss);

      double lr = warmup_lr(config, step);
      adagrad_decay_step(model.params(), lr, config.accumulator_decay, config.eps);
      ++step;
      result.final_loss = g.val(loss)[0];

      if (metrics != nullptr) {
        char line[96];
        std::snprintf(line, sizeof(line), "%zu\t%.9g\t%.9g", step, lr, result.final_loss);
        *metrics << line;
        bool do_eval = !val.empty() && ((config.eval_interval != 0 &&
                                         step % config.eval_interval == 0) ||
                                        step == config.total_steps);
        if (do_eval) {
          EvalReport report = evaluate_model(model, val);
          std::snprintf(line, sizeof(line), "\t%.9g", report.auc);
          *metrics << line;
        }
        *metrics << '\n';
        metrics->flush();
      }
    }
  }
  result.steps = step;
  return result;
}

}  // namespace sten
