#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "sten/features.hpp"

using namespace sten;

TEST_CASE("fnv1a64 matches the published offset basis and test vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  // Classic reference vector for 64-bit FNV-1a.
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hash_feature stays inside 1..size-1 and never returns the pad row") {
  for (std::size_t size : {2ul, 3ul, 97ul, 10007ul}) {
    for (int i = 0; i < 500; ++i) {
      auto row = hash_feature("item_id", "i" + std::to_string(i), size);
      CHECK(row >= 1);
      CHECK(row < static_cast<std::int64_t>(size));
    }
  }
}

TEST_CASE("hash_feature is deterministic and salted by field name") {
  CHECK(hash_feature("user_id", "u42", 10007) == hash_feature("user_id", "u42", 10007));
  // Same raw value under different field names should not collide in general;
  // check a batch so a single accidental collision cannot flip the test.
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    std::string v = "v" + std::to_string(i);
    if (hash_feature("user_id", v, 10007) != hash_feature("item_id", v, 10007)) ++differing;
  }
  CHECK(differing > 90);
  // Concatenation ambiguity: ("ab","c") and ("a","bc") must hash differently.
  CHECK(hash_feature("ab", "c", 10007) != hash_feature("a", "bc", 10007));
}

TEST_CASE("hash_feature spreads keys roughly uniformly") {
  const std::size_t table = 1000;
  std::vector<int> load(table, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ++load[static_cast<std::size_t>(hash_feature("item_id", "item-" + std::to_string(i), table))];
  }
  CHECK(load[0] == 0);  // pad row untouched
  double mean = static_cast<double>(n) / static_cast<double>(table - 1);
  int max_load = *std::max_element(load.begin(), load.end());
  CHECK(static_cast<double>(max_load) < 3.0 * mean);
}

TEST_CASE("hash_feature rejects degenerate tables") {
  CHECK_THROWS_AS(hash_feature("f", "x", 0), ConfigError);
  CHECK_THROWS_AS(hash_feature("f", "x", 1), ConfigError);
}

TEST_CASE("direct-index rows reserve slot zero for padding") {
  CHECK(hour_row(0) == 1);
  CHECK(hour_row(23) == 24);
  CHECK(period_row(Period::Breakfast) == 1);
  CHECK(period_row(Period::NightSnack) == 5);
  CHECK(dow_row(0) == 1);
  CHECK(dow_row(6) == 7);
  CHECK_THROWS_AS(hour_row(-1), RangeError);
  CHECK_THROWS_AS(hour_row(24), RangeError);
  CHECK_THROWS_AS(dow_row(7), RangeError);
}

TEST_CASE("temporal_of_unix decodes UTC fields") {
  // 1970-01-01 00:00 UTC, a Thursday.
  TemporalFeature t0 = temporal_of_unix(0);
  CHECK(t0.hour_of_day == 0);
  CHECK(t0.day_of_week == 0);
  CHECK(t0.period == Period::NightSnack);

  // 2024-01-01 00:00 UTC, a Monday.
  TemporalFeature t1 = temporal_of_unix(1704067200);
  CHECK(t1.hour_of_day == 0);
  CHECK(t1.day_of_week == 4);

  // 2024-01-01 12:30 UTC: lunch.
  TemporalFeature t2 = temporal_of_unix(1704067200 + 12 * 3600 + 1800);
  CHECK(t2.hour_of_day == 12);
  CHECK(t2.period == Period::Lunch);
  CHECK(t2.day_of_week == 4);

  // One second before midnight rolls neither hour nor day.
  TemporalFeature t3 = temporal_of_unix(1704067200 + 86399);
  CHECK(t3.hour_of_day == 23);
  CHECK(t3.period == Period::NightSnack);
  CHECK(t3.day_of_week == 4);

  // Next day is Tuesday.
  CHECK(temporal_of_unix(1704067200 + 86400).day_of_week == 5);
}

TEST_CASE("temporal_of_unix handles pre-epoch times") {
  // 1969-12-31 23:00 UTC, a Wednesday.
  TemporalFeature t = temporal_of_unix(-3600);
  CHECK(t.hour_of_day == 23);
  CHECK(t.day_of_week == 6);
}

TEST_CASE("temporal_of_unix honors custom period boundaries") {
  PeriodBoundaries b;
  b.breakfast = 5;
  b.lunch = 10;
  b.afternoon_tea = 14;
  b.dinner = 16;
  b.night_snack = 21;
  TemporalFeature t = temporal_of_unix(16 * 3600, b);
  CHECK(t.period == Period::Dinner);
}
