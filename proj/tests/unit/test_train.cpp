#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sten/train.hpp"

using namespace sten;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 2;
  c.hash_table_size = 11;
  c.seq_len = 3;
  c.ffn_hidden = 4;
  c.att_dim = 4;
  c.tower = {8, 4, 2};
  return c;
}

std::vector<Sample> tiny_samples(std::size_t n) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.label = static_cast<int>((i * 7 + 3) % 5 == 0 ? 1 : 0);
    s.user_id = "u" + std::to_string(i % 6);
    s.user_gender = i % 2 ? "f" : "m";
    s.item_id = "i" + std::to_string(i % 9);
    s.item_category = "c" + std::to_string(i % 4);
    s.request_time = 1704067200 + static_cast<std::int64_t>(i) * 9173;
    s.request_location = {31.1 + 0.002 * static_cast<double>(i % 11), 121.5};
    s.request_aoi = "a" + std::to_string(i % 3);
    if (i % 3 != 0) {
      BehaviorEvent e{"i" + std::to_string((i + 2) % 9), "c" + std::to_string(i % 4),
                      s.request_time - 7200, s.request_location};
      s.behaviors.push_back(e);
    }
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig fast_train(std::size_t steps) {
  TrainConfig t;
  t.batch_size = 8;
  t.warmup_steps = std::min<std::size_t>(steps, 10);
  t.total_steps = steps;
  t.eval_interval = 0;
  return t;
}

}  // namespace

TEST_CASE("warmup schedule hits the documented points") {
  TrainConfig t;  // base 0.001, peak 0.015, warmup 1000
  CHECK(warmup_lr(t, 0) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(warmup_lr(t, 500) == doctest::Approx(0.008).epsilon(1e-12));
  CHECK(warmup_lr(t, 1000) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(warmup_lr(t, 4999) == doctest::Approx(0.015).epsilon(1e-12));
  // Monotone non-decreasing across the ramp.
  double prev = 0.0;
  for (std::size_t s = 0; s <= t.warmup_steps; ++s) {
    double lr = warmup_lr(t, s);
    CHECK(lr >= prev);
    prev = lr;
  }
}

TEST_CASE("warmup with zero warmup steps is flat at the peak") {
  TrainConfig t;
  t.warmup_steps = 0;
  CHECK(warmup_lr(t, 0) == 0.015);
  CHECK(warmup_lr(t, 100) == 0.015);
}

TEST_CASE("optimizer update against a hand-computed value") {
  ParameterStore ps;
  Parameter& p = ps.create("w", {1});
  p.value.v[0] = 1.0;
  p.gradient.v[0] = 1.0;
  p.accumulator.v[0] = 0.0;
  // acc = 1*0 + 1 = 1; theta = 1 - 0.1 * 1 / (sqrt(1) + 0) = 0.9.
  adagrad_decay_step(ps, 0.1, 1.0, 0.0);
  CHECK(p.value.v[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(p.accumulator.v[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("optimizer accumulator decays and shrinks the effective step") {
  ParameterStore ps;
  Parameter& p = ps.create("w", {2});
  p.value.v = {1.0, 1.0};
  p.gradient.v = {2.0, 2.0};
  p.accumulator.v = {4.0, 0.0};
  adagrad_decay_step(ps, 0.5, 0.5, 1e-6);
  // acc0 = 0.5*4 + 4 = 6; acc1 = 0.5*0 + 4 = 4.
  CHECK(p.accumulator.v[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(p.accumulator.v[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(p.value.v[0] == doctest::Approx(1.0 - 0.5 * 2.0 / (std::sqrt(6.0) + 1e-6)).epsilon(1e-12));
  CHECK(p.value.v[1] == doctest::Approx(1.0 - 0.5 * 2.0 / (2.0 + 1e-6)).epsilon(1e-12));
}

TEST_CASE("optimizer with zero gradient only decays the accumulator") {
  ParameterStore ps;
  Parameter& p = ps.create("w", {1});
  p.value.v[0] = 3.0;
  p.gradient.v[0] = 0.0;
  p.accumulator.v[0] = 2.0;
  adagrad_decay_step(ps, 0.1, 0.9, 1e-6);
  CHECK(p.value.v[0] == 3.0);
  CHECK(p.accumulator.v[0] == doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("optimizer rejects non-finite gradients and names the parameter") {
  ParameterStore ps;
  ps.create("fine", {1}).gradient.v[0] = 0.5;
  Parameter& bad = ps.create("tower.fc0.w", {1});
  bad.gradient.v[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adagrad_decay_step(ps, 0.1, 0.9, 1e-6);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("tower.fc0.w") != std::string::npos);
  }
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.batch_size = 1;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.base_lr = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.peak_lr = 0.0005;  // below base
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.warmup_steps = 6000;  // beyond total
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.accumulator_decay = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.accumulator_decay = 1.5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.eps = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("bce_loss on known values") {
  std::vector<double> p1{0.5};
  std::vector<int> l1{1};
  CHECK(std::abs(bce_loss(p1, l1) - std::numbers::ln2) <= 1e-12);
  std::vector<double> p2{0.9, 0.1};
  std::vector<int> l2{1, 0};
  CHECK(bce_loss(p2, l2) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("training reduces the loss on a learnable dataset") {
  ModelConfig cfg = tiny_config();
  StENModel model(cfg, 7);
  auto samples = tiny_samples(64);
  std::ostringstream metrics;
  TrainConfig t = fast_train(60);
  TrainResult r = train_loop(model, samples, {}, t, &metrics);
  CHECK(r.steps == 60);

  // First logged loss vs the final one.
  std::istringstream lines(metrics.str());
  std::string line;
  double first_loss = -1.0;
  std::size_t n_lines = 0;
  while (std::getline(lines, line)) {
    ++n_lines;
    if (n_lines == 1) {
      std::istringstream f(line);
      std::size_t step;
      double lr;
      f >> step >> lr >> first_loss;
      CHECK(step == 1);
      CHECK(lr == doctest::Approx(t.base_lr).epsilon(1e-12));
    }
  }
  CHECK(n_lines == 60);
  CHECK(r.final_loss < first_loss);
  CHECK(std::isfinite(r.final_loss));
}

TEST_CASE("two runs with one seed produce identical logs and weights") {
  ModelConfig cfg = tiny_config();
  auto samples = tiny_samples(40);
  TrainConfig t = fast_train(25);
  t.eval_interval = 10;
  auto val = tiny_samples(20);

  std::ostringstream m1, m2;
  StENModel a(cfg, 3);
  StENModel b(cfg, 3);
  train_loop(a, samples, val, t, &m1);
  train_loop(b, samples, val, t, &m2);
  CHECK(m1.str() == m2.str());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].value.v == b.params()[i].value.v);
  }
}

TEST_CASE("a different data order seed changes the trajectory") {
  ModelConfig cfg = tiny_config();
  auto samples = tiny_samples(40);
  TrainConfig t1 = fast_train(25);
  TrainConfig t2 = t1;
  t2.seed = 2;
  std::ostringstream m1, m2;
  StENModel a(cfg, 3);
  StENModel b(cfg, 3);
  train_loop(a, samples, {}, t1, &m1);
  train_loop(b, samples, {}, t2, &m2);
  CHECK(m1.str() != m2.str());
}

TEST_CASE("metrics lines carry val_auc at the evaluation cadence") {
  ModelConfig cfg = tiny_config();
  StENModel model(cfg, 11);
  auto samples = tiny_samples(32);
  auto val = tiny_samples(16);
  TrainConfig t = fast_train(7);
  t.eval_interval = 3;
  std::ostringstream metrics;
  train_loop(model, samples, val, t, &metrics);
  std::istringstream lines(metrics.str());
  std::string line;
  std::size_t step = 0;
  while (std::getline(lines, line)) {
    ++step;
    std::size_t tabs = 0;
    for (char c : line) tabs += c == '\t';
    bool eval_step = step % t.eval_interval == 0 || step == t.total_steps;
    CHECK(tabs == (eval_step ? 3 : 2));
  }
  CHECK(step == 7);
}

TEST_CASE("no val set means no val_auc column anywhere") {
  ModelConfig cfg = tiny_config();
  StENModel model(cfg, 11);
  auto samples = tiny_samples(32);
  TrainConfig t = fast_train(6);
  t.eval_interval = 2;
  std::ostringstream metrics;
  train_loop(model, samples, {}, t, &metrics);
  std::istringstream lines(metrics.str());
  std::string line;
  while (std::getline(lines, line)) {
    std::size_t tabs = 0;
    for (char c : line) tabs += c == '\t';
    CHECK(tabs == 2);
  }
}

TEST_CASE("training on fewer than two samples is refused") {
  ModelConfig cfg = tiny_config();
  StENModel model(cfg, 1);
  auto one = tiny_samples(1);
  TrainConfig t = fast_train(5);
  CHECK_THROWS_AS(train_loop(model, one, {}, t, nullptr), ConfigError);
  CHECK_THROWS_AS(train_loop(model, {}, {}, t, nullptr), ConfigError);
}

TEST_CASE("null metrics stream is allowed") {
  ModelConfig cfg = tiny_config();
  StENModel model(cfg, 2);
  auto samples = tiny_samples(16);
  TrainConfig t = fast_train(3);
  TrainResult r = train_loop(model, samples, {}, t, nullptr);
  CHECK(r.steps == 3);
}
