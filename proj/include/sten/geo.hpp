#pragma once

#include <array>
#include <string>

#include "sten/errors.hpp"

namespace sten {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// Base-32 geohash of `len` characters (1..12). Latitude must be in
/// [-90, 90] and longitude in [-180, 180], anything else throws RangeError.
std::string geohash_encode(double lat, double lon, std::size_t len);

inline std::string geohash6_encode(double lat, double lon) { return geohash_encode(lat, lon, 6); }
inline std::string geohash5_encode(double lat, double lon) { return geohash_encode(lat, lon, 5); }

/// Meal-anchored slices of the day, in fixed order.
enum class Period : int { Breakfast = 0, Lunch = 1, AfternoonTea = 2, Dinner = 3, NightSnack = 4 };

constexpr std::size_t kNumPeriods = 5;

/// Start hour of each period except night's wrap-around tail; night covers
/// [night_snack, 24) plus [0, breakfast). Hours are strictly increasing.
struct PeriodBoundaries {
  int breakfast = 5;
  int lunch = 10;
  int afternoon_tea = 14;
  int dinner = 17;
  int night_snack = 21;

  std::array<int, 5> starts() const { return {breakfast, lunch, afternoon_tea, dinner, night_snack}; }
};

/// Maps an hour of day (0..23) to its period. Throws RangeError on a bad
/// hour or non-increasing boundaries.
Period period_of_day(int hour, const PeriodBoundaries& bounds = {});

/// Lower-case identifier, e.g. "afternoon_tea".
const char* period_name(Period p);

}  // namespace sten
