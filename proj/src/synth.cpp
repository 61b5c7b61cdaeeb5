#include "sten/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "sten/errors.hpp"
#include "sten/rng.hpp"

namespace sten {

namespace {

constexpr std::int64_t kEpoch = 1704067200;  // simulation start, midnight UTC
constexpr int kDays = 8;
constexpr int kTrainDays = 7;
constexpr std::size_t kRegions = 24;
constexpr std::size_t kPrefsPerPlace = 3;
constexpr std::size_t kMaxRecordedBehaviors = 25;

// Click-model gains. Period affinity dominates; place preference and
// behavior similarity add weaker, correlated effects. Regions carry a base
// rate of their own: some areas are simply busier than others regardless of
// what is shown, which any location-aware variant can read off the request
// cell alone.
constexpr double kPeriodGain = 5.0;
constexpr double kPlaceGain = 1.6;
constexpr double kBehaviorGain = 2.5;
constexpr double kRegionGain = 1.0;
constexpr double kSimilarityDecayHours = 72.0;

// Fraction of requests made away from both anchors, from a uniformly drawn
// region. A user's identity predicts the home and work base rates; the rate
// at a roamed-to region is only readable from the request location itself.
constexpr double kRoamProb = 0.25;

// Relative draw rates per hour of day; meals dominate, small hours are quiet.
constexpr double kHourWeight[24] = {
    0.3, 0.2, 0.2, 0.2, 0.3,       // 0-4
    1.0, 2.0, 2.5, 2.0, 1.0,       // 5-9
    2.0, 3.0, 3.0, 2.0,            // 10-13
    2.0, 2.5, 2.0,                 // 14-16
    2.5, 3.0, 3.0, 2.0,            // 17-20
    2.0, 1.5, 0.8,                 // 21-23
};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

int draw_hour(Rng& rng) {
  double total = 0.0;
  for (double w : kHourWeight) total += w;
  double r = rng.uniform() * total;
  for (int h = 0; h < 24; ++h) {
    r -= kHourWeight[h];
    if (r < 0.0) return h;
  }
  return 23;
}

struct UserProfile {
  std::size_t home_region = 0;
  std::size_t work_region = 0;
  std::string gender;
  std::array<std::vector<int>, 2> prefs;  // categories favored at home / at work
};

struct Impression {
  Sample sample;  // complete except for the label
  double score = 0.0;
  double coin = 0.0;
  int day = 0;
};

GeoPoint jitter(const GeoPoint& base, Rng& rng) {
  return {base.lat + (rng.uniform() - 0.5) * 0.0016,
          base.lon + (rng.uniform() - 0.5) * 0.0016};
}

std::vector<int> draw_distinct(Rng& rng, std::size_t n, std::size_t from) {
  std::vector<int> out;
  while (out.size() < n) {
    int c = static_cast<int>(rng.uniform_index(from));
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_users == 0 || n_items == 0 || n_train == 0 || n_test == 0) {
    throw ConfigError("synth sizes must be positive");
  }
  if (n_categories < kNumPeriods || n_categories < kPrefsPerPlace) {
    throw ConfigError("synth needs at least " + std::to_string(kNumPeriods) + " categories");
  }
  if (n_items < n_categories) throw ConfigError("synth needs n_items >= n_categories");
  if (!(base_ctr > 0.0) || !(base_ctr < 1.0)) throw ConfigError("base_ctr must be in (0,1)");
  (void)period_of_day(0, periods);  // boundary sanity, throws RangeError
}

SynthResult synth_generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SynthResult out;

  // Planted structure: categories own a dominant period round-robin, items
  // own a category round-robin.
  PlantedStructure& ps = out.structure;
  ps.dominant_period.resize(config.n_categories);
  ps.category_period_affinity.resize(config.n_categories);
  std::array<std::vector<int>, kNumPeriods> cats_of_period;
  for (std::size_t c = 0; c < config.n_categories; ++c) {
    int dom = static_cast<int>(c % kNumPeriods);
    ps.dominant_period[c] = dom;
    cats_of_period[static_cast<std::size_t>(dom)].push_back(static_cast<int>(c));
    for (std::size_t p = 0; p < kNumPeriods; ++p) {
      ps.category_period_affinity[c][p] = (static_cast<int>(p) == dom) ? 0.6 : 0.1;
    }
  }
  ps.item_category.resize(config.n_items);
  std::vector<std::vector<int>> items_of_cat(config.n_categories);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    int c = static_cast<int>(i % config.n_categories);
    ps.item_category[i] = c;
    items_of_cat[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
  }

  // A shared pool of geographic anchors; homes and workplaces snap to these
  // so geohash cells repeat across users. Each anchor also carries a base
  // click rate of its own.
  ps.region_center.resize(kRegions);
  ps.region_bias.resize(kRegions);
  for (std::size_t r = 0; r < kRegions; ++r) {
    ps.region_center[r].lat = 31.0 + 0.3 * rng.uniform();
    ps.region_center[r].lon = 121.2 + 0.4 * rng.uniform();
    ps.region_bias[r] = kRegionGain * (2.0 * rng.uniform() - 1.0);
  }

  std::vector<UserProfile> users(config.n_users);
  for (UserProfile& u : users) {
    std::size_t h = rng.uniform_index(kRegions);
    std::size_t w = rng.uniform_index(kRegions);
    while (w == h) w = rng.uniform_index(kRegions);
    u.home_region = h;
    u.work_region = w;
    u.gender = rng.bernoulli(0.5) ? "f" : "m";
    u.prefs[0] = draw_distinct(rng, kPrefsPerPlace, config.n_categories);
    u.prefs[1] = draw_distinct(rng, kPrefsPerPlace, config.n_categories);
  }

  // Enough impressions per user that both split pools comfortably cover the
  // requested sample counts.
  double need_train = 1.2 * static_cast<double>(kDays) * static_cast<double>(config.n_train) /
                      (static_cast<double>(kTrainDays) * static_cast<double>(config.n_users));
  double need_test = 1.2 * static_cast<double>(kDays) * static_cast<double>(config.n_test) /
                     static_cast<double>(config.n_users);
  std::size_t events_base =
      std::max<std::size_t>(40, static_cast<std::size_t>(std::ceil(std::max(need_train, need_test))));

  std::vector<Impression> impressions;
  impressions.reserve(config.n_users * (events_base + events_base / 6));
  double provisional_bias = std::log(config.base_ctr / (1.0 - config.base_ctr));

  for (std::size_t u = 0; u < config.n_users; ++u) {
    const UserProfile& prof = users[u];
    std::size_t n_ev = events_base + rng.uniform_index(events_base / 3 + 1);
    std::vector<std::int64_t> times(n_ev);
    for (std::int64_t& t : times) {
      std::int64_t day = static_cast<std::int64_t>(rng.uniform_index(kDays));
      std::int64_t hour = draw_hour(rng);
      t = kEpoch + day * 86400 + hour * 3600 +
          static_cast<std::int64_t>(rng.uniform_index(60)) * 60 +
          static_cast<std::int64_t>(rng.uniform_index(60));
    }
    std::sort(times.begin(), times.end());

    std::vector<BehaviorEvent> clicked;
    for (std::int64_t t : times) {
      int hour = static_cast<int>((t / 3600) % 24);
      int place = (hour >= 9 && hour <= 18) ? 1 : 0;
      std::size_t region = place == 1 ? prof.work_region : prof.home_region;
      if (rng.uniform() < kRoamProb) region = rng.uniform_index(kRegions);
      GeoPoint pos = jitter(ps.region_center[region], rng);
      Period p_true = period_of_day(hour, config.periods);
      std::size_t p_eff = config.shuffle_periods ? rng.uniform_index(kNumPeriods)
                                                 : static_cast<std::size_t>(p_true);

      // Candidate mix: half uniform, 30% from the place's favored
      // categories, the rest from categories anchored to the period.
      int item;
      double mix = rng.uniform();
      if (mix < 0.5) {
        item = static_cast<int>(rng.uniform_index(config.n_items));
      } else if (mix < 0.8) {
        const std::vector<int>& cats = prof.prefs[static_cast<std::size_t>(place)];
        const std::vector<int>& pool =
            items_of_cat[static_cast<std::size_t>(cats[rng.uniform_index(cats.size())])];
        item = pool[rng.uniform_index(pool.size())];
      } else {
        const std::vector<int>& cats = cats_of_period[p_eff];
        const std::vector<int>& pool =
            items_of_cat[static_cast<std::size_t>(cats[rng.uniform_index(cats.size())])];
        item = pool[rng.uniform_index(pool.size())];
      }
      int cat = ps.item_category[static_cast<std::size_t>(item)];

      double score = ps.region_bias[region];
      score += kPeriodGain * (ps.category_period_affinity[static_cast<std::size_t>(cat)][p_eff] - 0.2);
      const std::vector<int>& here = prof.prefs[static_cast<std::size_t>(place)];
      if (std::find(here.begin(), here.end(), cat) != here.end()) score += kPlaceGain;
      double num = 0.0, den = 1.0;
      std::string cat_name = "c" + std::to_string(cat);
      for (const BehaviorEvent& e : clicked) {
        double dh = static_cast<double>(t - e.click_time) / 3600.0;
        double w = std::exp(-dh / kSimilarityDecayHours);
        den += w;
        if (e.category == cat_name) num += w;
      }
      score += kBehaviorGain * num / den;

      Impression imp;
      imp.score = score;
      imp.coin = rng.uniform();
      imp.day = static_cast<int>((t - kEpoch) / 86400);
      Sample& s = imp.sample;
      s.user_id = "u" + std::to_string(u);
      s.user_gender = prof.gender;
      s.item_id = "i" + std::to_string(item);
      s.item_category = cat_name;
      s.request_time = t;
      s.request_location = pos;
      s.request_aoi = geohash5_encode(pos.lat, pos.lon);
      std::size_t nb = std::min(clicked.size(), kMaxRecordedBehaviors);
      s.behaviors.assign(clicked.end() - static_cast<std::ptrdiff_t>(nb), clicked.end());

      // Provisional label grows the click history; the same coin decides the
      // final label after calibration, so histories and labels stay coupled.
      if (imp.coin < sigmoid(provisional_bias + score)) {
        clicked.push_back(BehaviorEvent{s.item_id, cat_name, t, pos});
      }
      impressions.push_back(std::move(imp));
    }
  }

  // Bisect the intercept so the expected CTR over all impressions matches
  // base_ctr. The mean of sigmoid(b + s) is strictly increasing in b.
  double lo = -20.0, hi = 20.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (const Impression& imp : impressions) mean += sigmoid(mid + imp.score);
    mean /= static_cast<double>(impressions.size());
    if (mean < config.base_ctr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.bias = 0.5 * (lo + hi);

  std::size_t clicks = 0;
  std::vector<std::size_t> train_pool, test_pool;
  for (std::size_t i = 0; i < impressions.size(); ++i) {
    Impression& imp = impressions[i];
    imp.sample.label = imp.coin < sigmoid(out.bias + imp.score) ? 1 : 0;
    clicks += static_cast<std::size_t>(imp.sample.label);
    (imp.day < kTrainDays ? train_pool : test_pool).push_back(i);
  }
  out.realized_ctr = static_cast<double>(clicks) / static_cast<double>(impressions.size());

  if (train_pool.size() < config.n_train || test_pool.size() < config.n_test) {
    throw ConfigError("synth pools smaller than requested sample counts");
  }
  rng.shuffle(train_pool);
  rng.shuffle(test_pool);
  out.train.reserve(config.n_train);
  out.test.reserve(config.n_test);
  for (std::size_t i = 0; i < config.n_train; ++i) {
    out.train.push_back(std::move(impressions[train_pool[i]].sample));
  }
  for (std::size_t i = 0; i < config.n_test; ++i) {
    out.test.push_back(std::move(impressions[test_pool[i]].sample));
  }
  return out;
}

}  // namespace sten
