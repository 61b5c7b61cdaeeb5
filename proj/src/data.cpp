#include "sten/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sten {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool in_geo_bounds(const GeoPoint& p) {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

// Returns false on any malformed field.
bool parse_line(std::string_view line, Sample& s) {
  std::vector<std::string_view> cols = split(line, '\t');
  if (cols.size() != 10) return false;
  std::int64_t label = -1;
  if (!parse_i64(cols[0], label) || (label != 0 && label != 1)) return false;
  s.label = static_cast<int>(label);
  if (cols[1].empty() || cols[2].empty() || cols[3].empty() || cols[4].empty()) return false;
  s.user_id = std::string(cols[1]);
  s.user_gender = std::string(cols[2]);
  s.item_id = std::string(cols[3]);
  s.item_category = std::string(cols[4]);
  if (!parse_i64(cols[5], s.request_time)) return false;
  if (!parse_f64(cols[6], s.request_location.lat)) return false;
  if (!parse_f64(cols[7], s.request_location.lon)) return false;
  if (!in_geo_bounds(s.request_location)) return false;
  if (cols[8].empty()) return false;
  s.request_aoi = std::string(cols[8]);
  s.behaviors.clear();
  if (!cols[9].empty()) {
    for (std::string_view ev : split(cols[9], '|')) {
      std::vector<std::string_view> f = split(ev, ',');
      if (f.size() != 5 || f[0].empty() || f[1].empty()) return false;
      BehaviorEvent e;
      e.item_id = std::string(f[0]);
      e.category = std::string(f[1]);
      if (!parse_i64(f[2], e.click_time)) return false;
      if (!parse_f64(f[3], e.location.lat)) return false;
      if (!parse_f64(f[4], e.location.lon)) return false;
      if (!in_geo_bounds(e.location)) return false;
      if (e.click_time > s.request_time) return false;
      s.behaviors.push_back(std::move(e));
    }
  }
  std::stable_sort(s.behaviors.begin(), s.behaviors.end(),
                   [](const BehaviorEvent& a, const BehaviorEvent& b) {
                     return a.click_time < b.click_time;
                   });
  return true;
}

std::string format_coord(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

ParseResult parse_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  ParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++result.total_lines;
    Sample s;
    if (parse_line(line, s)) {
      result.samples.push_back(std::move(s));
    } else {
      ++result.malformed;
    }
  }
  if (in.bad()) throw IoError("read failure on " + path);
  if (result.total_lines > 0 &&
      static_cast<double>(result.malformed) > 0.01 * static_cast<double>(result.total_lines)) {
    throw SchemaError(path + ": " + std::to_string(result.malformed) + " of " +
                      std::to_string(result.total_lines) + " lines malformed (over 1%)");
  }
  return result;
}

std::vector<Sample> parse_tsv_strict(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Sample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Sample s;
    if (!parse_line(line, s)) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed sample line");
    }
    samples.push_back(std::move(s));
  }
  if (in.bad()) throw IoError("read failure on " + path);
  return samples;
}

std::string sample_to_line(const Sample& s) {
  std::ostringstream out;
  out << s.label << '\t' << s.user_id << '\t' << s.user_gender << '\t' << s.item_id << '\t'
      << s.item_category << '\t' << s.request_time << '\t' << format_coord(s.request_location.lat)
      << '\t' << format_coord(s.request_location.lon) << '\t' << s.request_aoi << '\t';
  for (std::size_t i = 0; i < s.behaviors.size(); ++i) {
    const BehaviorEvent& e = s.behaviors[i];
    if (i) out << '|';
    out << e.item_id << ',' << e.category << ',' << e.click_time << ','
        << format_coord(e.location.lat) << ',' << format_coord(e.location.lon);
  }
  return out.str();
}

void write_tsv(const std::string& path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const Sample& s : samples) out << sample_to_line(s) << '\n';
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

PaddedBatch encode_batch(std::span<const Sample> samples, const ModelConfig& config) {
  const std::size_t n = samples.size();
  const std::size_t l = config.seq_len;
  PaddedBatch b;
  b.n = n;
  b.seq_len = l;
  b.user_id.resize(n);
  b.gender.resize(n);
  b.item_id.resize(n);
  b.category.resize(n);
  b.geohash.resize(n);
  b.aoi.resize(n);
  b.hour.resize(n);
  b.period.resize(n);
  b.dow.resize(n);
  b.b_item.assign(n * l, 0);
  b.b_category.assign(n * l, 0);
  b.b_period.assign(n * l, 0);
  if (n > 0) {
    b.mask = Tensor({n, l});
    b.t_hours = Tensor::full({n, l}, config.t_clamp_hours);
    b.labels = Tensor({n});
  }
  const std::size_t ts = config.hash_table_size;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    b.user_id[i] = hash_feature("user_id", s.user_id, ts);
    b.gender[i] = hash_feature("gender", s.user_gender, ts);
    b.item_id[i] = hash_feature("item_id", s.item_id, ts);
    b.category[i] = hash_feature("category", s.item_category, ts);
    b.geohash[i] = hash_feature(
        "geohash6", geohash6_encode(s.request_location.lat, s.request_location.lon), ts);
    b.aoi[i] = hash_feature("aoi", s.request_aoi, ts);
    TemporalFeature tf = temporal_of_unix(s.request_time, config.periods);
    b.hour[i] = hour_row(tf.hour_of_day);
    b.period[i] = period_row(tf.period);
    b.dow[i] = dow_row(tf.day_of_week);
    b.labels.v[i] = static_cast<double>(s.label);

    // Keep the seq_len most recent events; they fill the tail positions.
    std::size_t keep = std::min(s.behaviors.size(), l);
    std::size_t first = s.behaviors.size() - keep;
    for (std::size_t k = 0; k < keep; ++k) {
      const BehaviorEvent& e = s.behaviors[first + k];
      std::size_t pos = i * l + (l - keep + k);
      b.b_item[pos] = hash_feature("item_id", e.item_id, ts);
      b.b_category[pos] = hash_feature("category", e.category, ts);
      TemporalFeature et = temporal_of_unix(e.click_time, config.periods);
      b.b_period[pos] = period_row(et.period);
      b.mask.v[pos] = 1.0;
      double hours = static_cast<double>(s.request_time - e.click_time) / 3600.0;
      if (hours < 0.0) hours = 0.0;
      if (hours > config.t_clamp_hours) hours = config.t_clamp_hours;
      b.t_hours.v[pos] = hours;
    }
  }
  return b;
}

std::array<Tensor, kNumPeriods> slice_by_period(const PaddedBatch& batch) {
  std::array<Tensor, kNumPeriods> masks;
  if (batch.n == 0) return masks;  // empty batch: five empty masks
  for (std::size_t p = 0; p < kNumPeriods; ++p) {
    masks[p] = Tensor({batch.n, batch.seq_len});
  }
  for (std::size_t pos = 0; pos < batch.n * batch.seq_len; ++pos) {
    if (batch.mask.v[pos] == 0.0) continue;
    std::int64_t pid = batch.b_period[pos];
    if (pid < 1 || pid > static_cast<std::int64_t>(kNumPeriods)) {
      throw RangeError("slice_by_period: period id " + std::to_string(pid) + " out of range");
    }
    masks[static_cast<std::size_t>(pid - 1)].v[pos] = 1.0;
  }
  return masks;
}

}  // namespace sten
