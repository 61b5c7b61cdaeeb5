#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sten/config.hpp"
#include "sten/data.hpp"
#include "sten/graph.hpp"
#include "sten/params.hpp"

namespace sten {

/// Every named intermediate of one forward pass. Handles are kNoVar for
/// blocks the ablation turns off.
struct ForwardOutputs {
  // Profile activation.
  Var att_u = kNoVar, att_m = kNoVar, h_u = kNoVar, h_m = kNoVar, h_stpro = kNoVar;
  // Temporal evolving branch.
  Var f_te = kNoVar, w_te = kNoVar, att_tea = kNoVar, h_tea = kNoVar;
  // Temporal periodic branch.
  std::array<Var, kNumPeriods> mean_period = {kNoVar, kNoVar, kNoVar, kNoVar, kNoVar};
  Var h_tpf = kNoVar;
  // Spatial branch.
  Var q_spa = kNoVar, h_spa = kNoVar;
  Var h_stpre = kNoVar;
  // Target attention.
  Var att_logits = kNoVar, att_weights = kNoVar, h_ta = kNoVar;
  // Tower.
  std::array<Var, 4> dense = {kNoVar, kNoVar, kNoVar, kNoVar};
  Var logits = kNoVar;      // [N]
  Var prediction = kNoVar;  // [N], sigmoid of logits
};

/// The CTR model. Owns parameters (only the ones the ablation uses) and the
/// batch-norm running statistics; forward() builds the compute graph for one
/// padded batch.
class StENModel {
 public:
  StENModel(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  std::vector<BatchNormState>& bn_states() { return bn_; }
  const std::vector<BatchNormState>& bn_states() const { return bn_; }

  ForwardOutputs forward(Graph& g, const PaddedBatch& batch, BnMode mode);

  /// Widens the sequence-axis transform so the model accepts batches padded
  /// to new_len. The new leading positions carry zero weight, so outputs at
  /// previously valid positions are bitwise unchanged.
  void resize_sequence(std::size_t new_len);

  /// Scores raw samples in inference mode, preserving order.
  std::vector<double> predict(std::span<const Sample> samples, std::size_t batch_size = 512);

 private:
  ModelConfig config_;
  ParameterStore params_;
  std::vector<BatchNormState> bn_;
};

}  // namespace sten
