#include "sten/geo.hpp"

#include <cmath>

namespace sten {

namespace {
constexpr char kBase32[] = "0123456789bcdefghjkmnpqrstuvwxyz";
}

std::string geohash_encode(double lat, double lon, std::size_t len) {
  if (len < 1 || len > 12) {
    throw RangeError("geohash_encode: length " + std::to_string(len) + " outside 1..12");
  }
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    throw RangeError("geohash_encode: latitude " + std::to_string(lat) + " outside [-90, 90]");
  }
  if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) {
    throw RangeError("geohash_encode: longitude " + std::to_string(lon) + " outside [-180, 180]");
  }
  double lat_lo = -90.0, lat_hi = 90.0;
  double lon_lo = -180.0, lon_hi = 180.0;
  std::string out;
  out.reserve(len);
  bool even = true;  // even bits refine longitude, odd bits latitude
  int bit = 0;
  int ch = 0;
  while (out.size() < len) {
    if (even) {
      double mid = (lon_lo + lon_hi) / 2.0;
      if (lon >= mid) {
        ch = (ch << 1) | 1;
        lon_lo = mid;
      } else {
        ch <<= 1;
        lon_hi = mid;
      }
    } else {
      double mid = (lat_lo + lat_hi) / 2.0;
      if (lat >= mid) {
        ch = (ch << 1) | 1;
        lat_lo = mid;
      } else {
        ch <<= 1;
        lat_hi = mid;
      }
    }
    even = !even;
    if (++bit == 5) {
      out.push_back(kBase32[ch]);
      bit = 0;
      ch = 0;
    }
  }
  return out;
}

Period period_of_day(int hour, const PeriodBoundaries& bounds) {
  if (hour < 0 || hour > 23) {
    throw RangeError("period_of_day: hour " + std::to_string(hour) + " outside 0..23");
  }
  auto s = bounds.starts();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] > 23 || (i > 0 && s[i] <= s[i - 1])) {
      throw RangeError("period_of_day: boundaries must be increasing hours in 0..23");
    }
  }
  if (hour >= bounds.night_snack || hour < bounds.breakfast) return Period::NightSnack;
  if (hour < bounds.lunch) return Period::Breakfast;
  if (hour < bounds.afternoon_tea) return Period::Lunch;
  if (hour < bounds.dinner) return Period::AfternoonTea;
  return Period::Dinner;
}

const char* period_name(Period p) {
  switch (p) {
    case Period::Breakfast: return "breakfast";
    case Period::Lunch: return "lunch";
    case Period::AfternoonTea: return "afternoon_tea";
    case Period::Dinner: return "dinner";
    case Period::NightSnack: return "night_snack";
  }
  return "unknown";
}

}  // namespace sten
