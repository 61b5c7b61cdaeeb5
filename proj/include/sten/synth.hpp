#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sten/data.hpp"
#include "sten/geo.hpp"

namespace sten {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t n_users = 2000;
  std::size_t n_items = 5000;
  std::size_t n_categories = 30;
  std::size_t n_train = 50000;
  std::size_t n_test = 10000;
  double base_ctr = 0.10;
  /// When true, the label draw uses a freshly randomized period instead of
  /// the request period, severing the recorded-period signal while leaving
  /// every other planted effect intact.
  bool shuffle_periods = false;
  PeriodBoundaries periods;

  void validate() const;
};

/// The ground truth the generator plants, exposed so probes can measure how
/// much of it survives into the emitted samples.
struct PlantedStructure {
  std::vector<int> item_category;  // item index -> category index
  std::vector<std::array<double, kNumPeriods>> category_period_affinity;
  std::vector<int> dominant_period;   // per category
  std::vector<GeoPoint> region_center;  // shared anchors homes/works snap to
  std::vector<double> region_bias;      // per-region base-rate offset (logits)
};

struct SynthResult {
  std::vector<Sample> train;  // first seven simulated days
  std::vector<Sample> test;   // the eighth day
  PlantedStructure structure;
  double bias = 0.0;          // calibrated intercept of the click model
  double realized_ctr = 0.0;  // empirical CTR over train + test
};

/// Simulates users moving between a home and a work cell over eight days.
/// Click probability is sigmoid(bias + region base rate + period-affinity +
/// place-preference + recency-weighted behavior similarity); the intercept is
/// bisected so the expected CTR equals base_ctr. Deterministic given the
/// config.
SynthResult synth_generate(const SynthConfig& config);

}  // namespace sten
