#pragma once

#include <array>
#include <cstddef>

#include "sten/errors.hpp"
#include "sten/geo.hpp"

namespace sten {

/// Which blocks run on top of the shared backbone. All off is the BaseModel
/// (raw profiles, shared attention projections); all on is the full model.
struct Ablation {
  bool stpro = true;
  bool stpre = true;
  bool stta = true;
};

/// Architecture and feature-layout knobs. Field dims are derived from one
/// per-field embedding width so the layout invariants hold by construction:
/// the request feature st spans five fields (geohash, aoi, hour, period,
/// day-of-week), u and m span two each, and the spatial part g is the first
/// two slices of st.
struct ModelConfig {
  std::size_t embed_dim = 8;            // width of one categorical field
  std::size_t hash_table_size = 10007;  // rows per hashed id table, row 0 = pad
  std::size_t seq_len = 20;             // N_l, behavior positions after padding
  std::size_t ffn_hidden = 64;          // N_h
  std::size_t att_dim = 16;             // d_o = d_k
  std::array<std::size_t, 3> tower = {128, 64, 32};
  PeriodBoundaries periods;
  double t_clamp_hours = 168.0;  // cap on request-to-click intervals
  Ablation ablation;

  // Derived dimensions.
  std::size_t d_i() const { return 2 * embed_dim; }    // item_id + category
  std::size_t d_u() const { return 2 * embed_dim; }    // user_id + gender
  std::size_t n_u() const { return d_u(); }
  std::size_t g_dim() const { return 2 * embed_dim; }  // geohash6 + aoi
  std::size_t d_st() const { return 5 * embed_dim; }   // spatial + temporal request fields
  std::size_t n_gu() const { return g_dim() + d_u(); }
  std::size_t d_o() const { return att_dim; }
  std::size_t d_k() const { return att_dim; }

  // Direct-index tables: one pad row plus the value range.
  static constexpr std::size_t kHourRows = 25;
  static constexpr std::size_t kPeriodRows = 1 + kNumPeriods;
  static constexpr std::size_t kDowRows = 8;

  void validate() const {
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (hash_table_size < 2) throw ConfigError("hash_table_size must be at least 2");
    if (seq_len == 0) throw ConfigError("seq_len must be positive");
    if (ffn_hidden == 0) throw ConfigError("ffn_hidden must be positive");
    if (att_dim == 0) throw ConfigError("att_dim must be positive");
    for (std::size_t w : tower) {
      if (w == 0) throw ConfigError("tower widths must be positive");
    }
    if (!(t_clamp_hours > 0.0)) throw ConfigError("t_clamp_hours must be positive");
    try {
      (void)period_of_day(0, periods);
    } catch (const RangeError& e) {
      throw ConfigError(e.what());
    }
  }
};

}  // namespace sten
