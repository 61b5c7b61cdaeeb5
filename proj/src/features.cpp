#include "sten/features.hpp"

namespace sten {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::int64_t hash_feature(std::string_view field_name, std::string_view raw_value,
                          std::size_t table_size) {
  if (table_size < 2) throw ConfigError("hash_feature: table_size must be at least 2");
  std::string salted;
  salted.reserve(field_name.size() + 1 + raw_value.size());
  salted.append(field_name);
  salted.push_back('\x1f');  // unit separator keeps ("ab","c") != ("a","bc")
  salted.append(raw_value);
  std::uint64_t h = fnv1a64(salted);
  return 1 + static_cast<std::int64_t>(h % (table_size - 1));
}

TemporalFeature temporal_of_unix(std::int64_t unix_time, const PeriodBoundaries& bounds) {
  // Manual UTC decomposition; avoids gmtime's pre-epoch portability quirks.
  std::int64_t days = unix_time / 86400;
  std::int64_t secs = unix_time % 86400;
  if (secs < 0) {
    secs += 86400;
    days -= 1;
  }
  TemporalFeature t;
  t.hour_of_day = static_cast<int>(secs / 3600);
  t.period = period_of_day(t.hour_of_day, bounds);
  // 1970-01-01 was a Thursday; keep 0 = Thursday so dow is ((days mod 7)+7) mod 7.
  t.day_of_week = static_cast<int>(((days % 7) + 7) % 7);
  return t;
}

}  // namespace sten
