#include "sten/model.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "sten/blocks.hpp"
#include "sten/errors.hpp"
#include "sten/rng.hpp"

namespace sten {

namespace {

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& x : t.v) x = rng.uniform(-bound, bound);
}

void add_embedding(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t rows,
                   std::size_t dim) {
  Parameter& p = ps.create(name, {rows, dim});
  fill_uniform(p.value, 0.05, rng);
}

/// FC pair name.w [in, out], name.b [out]. Weights are uniform in the
/// +-sqrt(6/(fan_in+fan_out)) range, biases zero; zero_w forces zero weights
/// (used for the second layer of residual transforms so they start as the
/// identity).
void add_fc(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
            bool zero_w = false) {
  Parameter& w = ps.create(name + ".w", {in, out});
  if (!zero_w) {
    fill_uniform(w.value, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
  }
  ps.create(name + ".b", {out});
}

void add_ffn(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t d,
             std::size_t hidden) {
  add_fc(ps, rng, name + ".fc1", d, hidden);
  add_fc(ps, rng, name + ".fc2", hidden, d, /*zero_w=*/true);
}

void add_scalar(ParameterStore& ps, const std::string& name, double value) {
  ps.create(name, {1}).value[0] = value;
}

/// Rebuilds a [rows, cols] matrix as [new_rows, cols] with the old rows at
/// the bottom and zeros above (new leading sequence positions are pads).
Tensor shift_rows(const Tensor& t, std::size_t new_rows) {
  Tensor out({new_rows, t.dim(1)});
  std::size_t off = (new_rows - t.dim(0)) * t.dim(1);
  std::copy(t.v.begin(), t.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(off));
  return out;
}

Tensor shift_cols(const Tensor& t, std::size_t new_cols) {
  Tensor out({t.dim(0), new_cols});
  std::size_t shift = new_cols - t.dim(1);
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    for (std::size_t c = 0; c < t.dim(1); ++c) {
      out.v[r * new_cols + shift + c] = t.v[r * t.dim(1) + c];
    }
  }
  return out;
}

Tensor shift_vec(const Tensor& t, std::size_t new_len) {
  Tensor out({new_len});
  std::copy(t.v.begin(), t.v.end(),
            out.v.begin() + static_cast<std::ptrdiff_t>(new_len - t.size()));
  return out;
}

}  // namespace

StENModel::StENModel(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(init_seed);
  const std::size_t e = config_.embed_dim;
  const std::size_t ts = config_.hash_table_size;
  const Ablation& ab = config_.ablation;
  const bool need_st = ab.stpro || ab.stta;
  const bool need_g = need_st || ab.stpre;

  add_embedding(params_, rng, "embed.user_id", ts, e);
  add_embedding(params_, rng, "embed.gender", ts, e);
  add_embedding(params_, rng, "embed.item_id", ts, e);
  add_embedding(params_, rng, "embed.category", ts, e);
  if (need_g) {
    add_embedding(params_, rng, "embed.geohash6", ts, e);
    add_embedding(params_, rng, "embed.aoi", ts, e);
  }
  if (need_st) {
    add_embedding(params_, rng, "embed.hour", ModelConfig::kHourRows, e);
    add_embedding(params_, rng, "embed.period", ModelConfig::kPeriodRows, e);
    add_embedding(params_, rng, "embed.dow", ModelConfig::kDowRows, e);
  }

  if (ab.stpro) {
    add_fc(params_, rng, "stpro.fc_u", config_.d_st(), config_.d_u());
    add_fc(params_, rng, "stpro.fc_m", config_.d_st(), config_.d_i());
  }

  if (ab.stpre) {
    add_fc(params_, rng, "tea.time_fc1", config_.seq_len, config_.ffn_hidden);
    add_fc(params_, rng, "tea.time_fc2", config_.ffn_hidden, config_.seq_len, /*zero_w=*/true);
    add_fc(params_, rng, "tea.fc_t", config_.d_u(), 1);
    add_ffn(params_, rng, "tea.ffn_att", config_.d_i(), config_.ffn_hidden);
    add_ffn(params_, rng, "tea.ffn_pool", config_.d_i(), config_.ffn_hidden);
    add_ffn(params_, rng, "tpf.ffn", config_.d_i(), config_.ffn_hidden);
    add_fc(params_, rng, "spa.fc_q", config_.n_gu(), 1);
    add_ffn(params_, rng, "spa.ffn", config_.d_i(), config_.ffn_hidden);
    add_scalar(params_, "fuse.w_m", 1.0);
    add_scalar(params_, "fuse.w_tea", 1.0);
    add_scalar(params_, "fuse.w_tpf", 0.1);
    add_scalar(params_, "fuse.w_spa", 0.1);
  }

  if (ab.stta) {
    const std::size_t gen_out = config_.d_i() * config_.d_o() + config_.d_o();
    add_fc(params_, rng, "stta.gen_q", config_.d_st(), gen_out);
    add_fc(params_, rng, "stta.gen_k", config_.d_st(), gen_out);
    add_fc(params_, rng, "stta.gen_v", config_.d_st(), gen_out);
  } else {
    add_fc(params_, rng, "ta.proj_q", config_.d_i(), config_.d_o());
    add_fc(params_, rng, "ta.proj_k", config_.d_i(), config_.d_o());
    add_fc(params_, rng, "ta.proj_v", config_.d_i(), config_.d_o());
  }

  std::size_t width = (ab.stpro ? 4 * (config_.d_u() + config_.d_i())
                                : config_.d_u() + config_.d_i()) +
                      (ab.stpre ? config_.d_i() : 0) + config_.d_o();
  for (std::size_t i = 0; i < config_.tower.size(); ++i) {
    const std::string tag = std::to_string(i);
    add_fc(params_, rng, "tower.fc" + tag, width, config_.tower[i]);
    Parameter& gamma = params_.create("tower.bn" + tag + ".gamma", {config_.tower[i]});
    gamma.value.fill(1.0);
    params_.create("tower.bn" + tag + ".beta", {config_.tower[i]});
    bn_.emplace_back(config_.tower[i]);
    width = config_.tower[i];
  }
  add_fc(params_, rng, "tower.head", width, 1);
}

ForwardOutputs StENModel::forward(Graph& g, const PaddedBatch& batch, BnMode mode) {
  if (batch.n == 0) throw RangeError("forward: empty batch");
  if (batch.seq_len != config_.seq_len) {
    throw ShapeError("forward: batch seq_len " + std::to_string(batch.seq_len) +
                     " vs model seq_len " + std::to_string(config_.seq_len));
  }
  const std::size_t n = batch.n;
  const std::size_t l = batch.seq_len;
  const Ablation& ab = config_.ablation;
  const bool need_st = ab.stpro || ab.stta;
  const bool need_g = need_st || ab.stpre;
  ForwardOutputs fo;

  auto P = [&](const std::string& name) { return g.param(params_.at(name)); };

  Var t_item = P("embed.item_id");
  Var t_cat = P("embed.category");
  Var u = g.concat_last({g.embedding(P("embed.user_id"), batch.user_id, {n}),
                         g.embedding(P("embed.gender"), batch.gender, {n})});
  Var m = g.concat_last({g.embedding(t_item, batch.item_id, {n}),
                         g.embedding(t_cat, batch.category, {n})});
  Var b = g.concat_last({g.embedding(t_item, batch.b_item, {n, l}),
                         g.embedding(t_cat, batch.b_category, {n, l})});

  Var gfeat = kNoVar;
  Var st = kNoVar;
  if (need_g) {
    Var e_geo = g.embedding(P("embed.geohash6"), batch.geohash, {n});
    Var e_aoi = g.embedding(P("embed.aoi"), batch.aoi, {n});
    gfeat = g.concat_last({e_geo, e_aoi});
    if (need_st) {
      st = g.concat_last({e_geo, e_aoi, g.embedding(P("embed.hour"), batch.hour, {n}),
                          g.embedding(P("embed.period"), batch.period, {n}),
                          g.embedding(P("embed.dow"), batch.dow, {n})});
    }
  }

  if (ab.stpro) {
    fo.att_u = scalar_gate(g, st, u, P("stpro.fc_u.w"), P("stpro.fc_u.b"));
    fo.h_u = activation_unit(g, u, fo.att_u);
    fo.att_m = scalar_gate(g, st, m, P("stpro.fc_m.w"), P("stpro.fc_m.b"));
    fo.h_m = activation_unit(g, m, fo.att_m);
    fo.h_stpro = g.concat_last({fo.h_u, fo.h_m});
  }

  if (ab.stpre) {
    // Temporal evolving: softmax over a residual transform of masked e^-t,
    // plus a user-gated attention pool and a plain mean pool.
    Var z = g.mul(g.exp_neg(g.input(batch.t_hours)), g.input(batch.mask));
    Var f1 = g.leaky_relu(g.affine(z, P("tea.time_fc1.w"), P("tea.time_fc1.b")));
    fo.f_te = g.add(g.affine(f1, P("tea.time_fc2.w"), P("tea.time_fc2.b")), z);
    fo.w_te = g.softmax_masked(fo.f_te, batch.mask, MaskedRows::ZeroRow);
    Var gate_t = g.sigmoid(g.affine(u, P("tea.fc_t.w"), P("tea.fc_t.b")));
    Var gated_b = g.scale_rows(b, gate_t);
    Var att_in = ffn(g, gated_b, P("tea.ffn_att.fc1.w"), P("tea.ffn_att.fc1.b"),
                     P("tea.ffn_att.fc2.w"), P("tea.ffn_att.fc2.b"));
    fo.att_tea = g.weighted_pool(att_in, fo.w_te);
    Var pool_in = ffn(g, b, P("tea.ffn_pool.fc1.w"), P("tea.ffn_pool.fc1.b"),
                      P("tea.ffn_pool.fc2.w"), P("tea.ffn_pool.fc2.b"));
    Var pooled = g.masked_mean_pool(pool_in, batch.mask);
    fo.h_tea = g.add(g.scale_scalar(pooled, P("fuse.w_m")),
                     g.scale_scalar(fo.att_tea, P("fuse.w_tea")));

    // Temporal periodic: one shared transform, mean-pooled per period slice.
    Var fb = ffn(g, b, P("tpf.ffn.fc1.w"), P("tpf.ffn.fc1.b"), P("tpf.ffn.fc2.w"),
                 P("tpf.ffn.fc2.b"));
    std::array<Tensor, kNumPeriods> slices = slice_by_period(batch);
    Var acc = kNoVar;
    for (std::size_t p = 0; p < kNumPeriods; ++p) {
      fo.mean_period[p] = g.masked_mean_pool(fb, slices[p]);
      acc = (p == 0) ? fo.mean_period[p] : g.add(acc, fo.mean_period[p]);
    }
    fo.h_tpf = g.scale_const(acc, 1.0 / static_cast<double>(kNumPeriods));

    // Spatial preference: behaviors gated by a location+user scalar.
    Var qin = g.concat_last({gfeat, u});
    fo.q_spa = g.sigmoid(g.affine(qin, P("spa.fc_q.w"), P("spa.fc_q.b")));
    Var spa_in = ffn(g, g.scale_rows(b, fo.q_spa), P("spa.ffn.fc1.w"), P("spa.ffn.fc1.b"),
                     P("spa.ffn.fc2.w"), P("spa.ffn.fc2.b"));
    fo.h_spa = g.masked_mean_pool(spa_in, batch.mask);

    fo.h_stpre = g.add(fo.h_tea, g.add(g.scale_scalar(fo.h_tpf, P("fuse.w_tpf")),
                                       g.scale_scalar(fo.h_spa, P("fuse.w_spa"))));
  }

  // Target attention over behaviors. The full model generates per-sample
  // projections from the request context; the base model shares them.
  Var q = kNoVar, k = kNoVar, v = kNoVar;
  if (ab.stta) {
    const std::size_t di = config_.d_i();
    const std::size_t dd = config_.d_o();
    auto generate = [&](const std::string& prefix) {
      Var flat = g.affine(st, P(prefix + ".w"), P(prefix + ".b"));
      Var w = g.reshape(g.slice_last(flat, 0, di * dd), {n, di, dd});
      Var bias = g.slice_last(flat, di * dd, dd);
      return std::pair<Var, Var>(w, bias);
    };
    auto [wq, bq] = generate("stta.gen_q");
    q = g.reshape(g.batched_affine(g.reshape(m, {n, 1, di}), wq, bq), {n, dd});
    auto [wk, bk] = generate("stta.gen_k");
    k = g.batched_affine(b, wk, bk);
    auto [wv, bv] = generate("stta.gen_v");
    v = g.batched_affine(b, wv, bv);
  } else {
    q = g.affine(m, P("ta.proj_q.w"), P("ta.proj_q.b"));
    k = g.affine(b, P("ta.proj_k.w"), P("ta.proj_k.b"));
    v = g.affine(b, P("ta.proj_v.w"), P("ta.proj_v.b"));
  }
  fo.att_logits =
      g.scale_const(g.rowdot(k, q), 1.0 / std::sqrt(static_cast<double>(config_.d_k())));
  fo.att_weights = g.softmax_masked(fo.att_logits, batch.mask, MaskedRows::ZeroRow);
  fo.h_ta = g.weighted_pool(v, fo.att_weights);

  std::vector<Var> parts;
  parts.push_back(ab.stpro ? fo.h_stpro : g.concat_last({u, m}));
  if (ab.stpre) parts.push_back(fo.h_stpre);
  parts.push_back(fo.h_ta);
  fo.dense[0] = g.concat_last(std::span<const Var>(parts));

  Var x = fo.dense[0];
  for (std::size_t i = 0; i < config_.tower.size(); ++i) {
    const std::string tag = std::to_string(i);
    x = g.affine(x, P("tower.fc" + tag + ".w"), P("tower.fc" + tag + ".b"));
    x = g.batch_norm(x, P("tower.bn" + tag + ".gamma"), P("tower.bn" + tag + ".beta"), bn_[i],
                     mode);
    x = g.leaky_relu(x);
    fo.dense[i + 1] = x;
  }
  fo.logits = g.reshape(g.affine(x, P("tower.head.w"), P("tower.head.b")), {n});
  fo.prediction = g.sigmoid(fo.logits);
  return fo;
}

void StENModel::resize_sequence(std::size_t new_len) {
  if (new_len == config_.seq_len) return;
  if (new_len < config_.seq_len) {
    throw ConfigError("resize_sequence can only widen: " + std::to_string(config_.seq_len) +
                      " -> " + std::to_string(new_len));
  }
  if (config_.ablation.stpre) {
    // Left-padding means earlier positions are the pads, so old weights move
    // to the high end and the new leading slots carry exact zeros.
    Parameter& w1 = params_.at("tea.time_fc1.w");
    w1.value = shift_rows(w1.value, new_len);
    w1.gradient = shift_rows(w1.gradient, new_len);
    w1.accumulator = shift_rows(w1.accumulator, new_len);
    Parameter& w2 = params_.at("tea.time_fc2.w");
    w2.value = shift_cols(w2.value, new_len);
    w2.gradient = shift_cols(w2.gradient, new_len);
    w2.accumulator = shift_cols(w2.accumulator, new_len);
    Parameter& b2 = params_.at("tea.time_fc2.b");
    b2.value = shift_vec(b2.value, new_len);
    b2.gradient = shift_vec(b2.gradient, new_len);
    b2.accumulator = shift_vec(b2.accumulator, new_len);
  }
  config_.seq_len = new_len;
}

std::vector<double> StENModel::predict(std::span<const Sample> samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("predict: batch_size must be positive");
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    std::span<const Sample> chunk = samples.subspan(i, std::min(batch_size, samples.size() - i));
    PaddedBatch pb = encode_batch(chunk, config_);
    Graph g;
    ForwardOutputs fo = forward(g, pb, BnMode::Infer);
    const Tensor& p = g.val(fo.prediction);
    scores.insert(scores.end(), p.v.begin(), p.v.end());
  }
  return scores;
}

}  // namespace sten
