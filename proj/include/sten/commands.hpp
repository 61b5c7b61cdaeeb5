#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sten/eval.hpp"
#include "sten/run_config.hpp"
#include "sten/synth.hpp"
#include "sten/train.hpp"

namespace sten {

/// All commands validate their inputs fully before creating or writing any
/// file, and signal failure through the error types in errors.hpp; the CLI
/// maps those to exit codes.

struct GenDataArgs {
  std::string out_dir;
  SynthConfig synth;
};

/// Writes train.tsv, test.tsv, and manifest.txt into out_dir.
SynthResult cmd_gen_data(const GenDataArgs& args);

struct TrainArgs {
  std::string data_path;
  std::string out_dir;
  std::string config_path;  // optional key=value file
  std::string val_path;     // optional held-out split for periodic eval
  bool baseline = false;
  std::string ablation;  // comma-separated subset of stpro,stpre,stta
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> total_steps;
  std::optional<std::size_t> warmup_steps;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> eval_interval;
};

/// Trains the selected variant; writes config.txt, metrics.log, model.ckpt,
/// and manifest.txt into out_dir.
TrainResult cmd_train(const TrainArgs& args);

/// "stpro,stpre,stta" subsets; empty selects the full model. Unknown names
/// throw UsageError listing the valid ones.
Ablation parse_ablation(const std::string& spec);

struct EvalArgs {
  std::string checkpoint_path;
  std::string data_path;
  std::string base_checkpoint_path;  // optional, adds relaimpr_vs_base
};

EvalReport cmd_eval(const EvalArgs& args);

struct PredictArgs {
  std::string checkpoint_path;
  std::string input_path;
  std::string output_path;
};

/// One score per input line, order-preserving, full double precision.
void cmd_predict(const PredictArgs& args);

}  // namespace sten
