#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sten/config.hpp"
#include "sten/features.hpp"
#include "sten/tensor.hpp"

namespace sten {

struct BehaviorEvent {
  std::string item_id;
  std::string category;
  std::int64_t click_time = 0;
  GeoPoint location;
};

struct Sample {
  int label = 0;
  std::string user_id;
  std::string user_gender;
  std::string item_id;
  std::string item_category;
  std::int64_t request_time = 0;
  GeoPoint request_location;
  std::string request_aoi;
  std::vector<BehaviorEvent> behaviors;  // sorted by click_time ascending
};

struct ParseResult {
  std::vector<Sample> samples;
  std::size_t total_lines = 0;
  std::size_t malformed = 0;
};

/// Reads the tab-separated impression log. Malformed lines (wrong column
/// count, label outside {0,1}, unparseable numbers, out-of-range coordinates,
/// events after the request time) are counted and skipped; more than 1%
/// malformed throws SchemaError. An unreadable file throws IoError.
ParseResult parse_tsv(const std::string& path);

/// Strict variant for scoring inputs: every non-empty line must parse;
/// the first offending line throws ParseError naming path and line number.
std::vector<Sample> parse_tsv_strict(const std::string& path);

/// Writes samples in canonical form: coordinates with six decimals, times as
/// plain integers. parse_tsv(write_tsv(x)) is the identity on canonical data.
void write_tsv(const std::string& path, std::span<const Sample> samples);

std::string sample_to_line(const Sample& s);

/// Id-encoded, padded model inputs. Behavior grids are row-major
/// [n, seq_len]; shorter histories are left-padded so the most recent events
/// sit at the highest positions. Pad slots carry id 0, mask 0, and the
/// maximum clamped interval.
struct PaddedBatch {
  std::size_t n = 0;
  std::size_t seq_len = 0;
  std::vector<std::int64_t> user_id, gender, item_id, category;
  std::vector<std::int64_t> geohash, aoi, hour, period, dow;
  std::vector<std::int64_t> b_item, b_category, b_period;  // b_period: 0 pad, else 1+Period
  Tensor mask;     // [n, seq_len]
  Tensor t_hours;  // [n, seq_len], (request - click)/3600 clamped to [0, t_clamp_hours]
  Tensor labels;   // [n]
};

/// Encodes raw samples: hashes categorical fields, derives temporal features
/// (UTC), keeps the seq_len most recent events, left-pads the rest.
PaddedBatch encode_batch(std::span<const Sample> samples, const ModelConfig& config);

/// One 0/1 mask per period; together they partition the valid mask.
std::array<Tensor, kNumPeriods> slice_by_period(const PaddedBatch& batch);

}  // namespace sten
