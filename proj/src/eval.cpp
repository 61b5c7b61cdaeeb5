#include "sten/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sten/errors.hpp"

namespace sten {

namespace {

void check_pairs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores/labels length mismatch: " + std::to_string(scores.size()) + " vs " +
                     std::to_string(labels.size()));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("non-finite score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw RangeError("label outside {0,1}: " + std::to_string(y));
  }
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_pairs(scores, labels);
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y);
  std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc undefined: need both classes, got " + std::to_string(n_pos) +
                      " positives / " + std::to_string(n_neg) + " negatives");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U from average ranks of the positives; tied scores share
  // the mean of their rank block, which awards exactly half credit per pair.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += mean_rank;
    }
    i = j;
  }
  double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double relaimpr(double auc_model, double auc_base) {
  if (!(auc_base > 0.5)) {
    throw MetricError("relaimpr undefined: base auc " + fmt(auc_base) + " <= 0.5");
  }
  return (auc_model - 0.5) / (auc_base - 0.5) - 1.0;
}

double logloss_metric(std::span<const double> scores, std::span<const int> labels) {
  check_pairs(scores, labels);
  if (scores.empty()) throw RangeError("logloss of an empty batch");
  constexpr double kEps = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double p = std::min(1.0 - kEps, std::max(kEps, scores[i]));
    total += labels[i] == 1 ? -std::log(p) : -std::log1p(-p);
  }
  return total / static_cast<double>(scores.size());
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.auc = auc(scores, labels);
  r.logloss = logloss_metric(scores, labels);
  for (int y : labels) r.n_pos += static_cast<std::size_t>(y);
  r.n_neg = labels.size() - r.n_pos;
  return r;
}

EvalReport evaluate_model(StENModel& model, std::span<const Sample> samples) {
  std::vector<double> scores = model.predict(samples);
  std::vector<int> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
  return evaluate_scores(scores, labels);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "auc = " << fmt(auc) << "\n";
  os << "logloss = " << fmt(logloss) << "\n";
  os << "n_pos = " << n_pos << "\n";
  os << "n_neg = " << n_neg << "\n";
  if (relaimpr_vs_base) os << "relaimpr_vs_base = " << fmt(*relaimpr_vs_base) << "\n";
  return os.str();
}

}  // namespace sten
