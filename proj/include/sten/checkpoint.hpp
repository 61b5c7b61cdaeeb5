#pragma once

#include <string>

#include "sten/model.hpp"

namespace sten {

/// Binary model snapshot: magic line, the architecture config as key=value
/// text, then every parameter tensor plus the batch-norm running statistics
/// in registration order, little-endian f64. Written atomically (temp file +
/// rename). Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const StENModel& model);

/// Rebuilds the model from a snapshot; the embedded config defines the
/// architecture and feature encoding. Throws CheckpointError on a bad magic,
/// truncation, unknown tensors, or shape mismatches.
StENModel load_checkpoint(const std::string& path);

}  // namespace sten
