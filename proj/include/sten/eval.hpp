#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sten/data.hpp"
#include "sten/model.hpp"

namespace sten {

struct EvalReport {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::optional<double> relaimpr_vs_base;

  std::string to_text() const;  // key = value lines
};

/// Probability that a random positive outranks a random negative; tied pairs
/// count half. Rank-statistic implementation, O(n log n). Throws MetricError
/// when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

/// (auc_model - 0.5) / (auc_base - 0.5) - 1. Throws MetricError when
/// auc_base <= 0.5.
double relaimpr(double auc_model, double auc_base);

/// Mean binary cross-entropy of probability scores; scores are clamped away
/// from {0,1} before the logs.
double logloss_metric(std::span<const double> scores, std::span<const int> labels);

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels);

/// Scores the samples in inference mode and reports ranking metrics.
EvalReport evaluate_model(StENModel& model, std::span<const Sample> samples);

}  // namespace sten
