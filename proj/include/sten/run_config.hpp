#pragma once

#include <string>

#include "sten/config.hpp"
#include "sten/train.hpp"

namespace sten {

/// Everything one run needs: architecture plus optimizer schedule.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    model.validate();
    train.validate();
  }
};

/// Applies one assignment. Unknown keys and unparseable values throw
/// ConfigError naming the key.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a UTF-8 `key = value` file into `config`; blank lines and lines
/// starting with '#' are ignored. Throws IoError when unreadable and
/// ConfigError (with the line number) on bad entries.
void apply_config_file(RunConfig& config, const std::string& path);

RunConfig load_run_config(const std::string& path);

/// Echo of the effective configuration; load_run_config parses it back.
std::string run_config_text(const RunConfig& config);

/// The architecture subset alone (used inside checkpoints).
std::string model_config_text(const ModelConfig& config);
ModelConfig parse_model_config_text(const std::string& text);

}  // namespace sten
