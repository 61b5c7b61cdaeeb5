#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "sten/config.hpp"
#include "sten/geo.hpp"

namespace sten {

struct SpatialFeature {
  std::string geohash6;
  std::string aoi_id;
};

struct TemporalFeature {
  int hour_of_day = 0;   // 0..23
  Period period = Period::Breakfast;
  int day_of_week = 0;   // 0 = Thursday 1970-01-01; 0..6
};

/// FNV-1a over the bytes; stable across runs and platforms.
std::uint64_t fnv1a64(std::string_view bytes);

/// Row index for a hashed categorical: field-salted FNV-1a into 1..size-1.
/// Row 0 is reserved for padding and never returned.
std::int64_t hash_feature(std::string_view field_name, std::string_view raw_value,
                          std::size_t table_size);

// Direct-index rows (0 is the pad row everywhere).
inline std::int64_t hour_row(int hour) {
  if (hour < 0 || hour > 23) throw RangeError("hour_row: hour " + std::to_string(hour));
  return 1 + hour;
}
inline std::int64_t period_row(Period p) { return 1 + static_cast<std::int64_t>(p); }
inline std::int64_t dow_row(int dow) {
  if (dow < 0 || dow > 6) throw RangeError("dow_row: day " + std::to_string(dow));
  return 1 + dow;
}

/// Derives the hour of day, period, and day of week from a unix timestamp,
/// interpreted in UTC.
TemporalFeature temporal_of_unix(std::int64_t unix_time, const PeriodBoundaries& bounds = {});

}  // namespace sten
