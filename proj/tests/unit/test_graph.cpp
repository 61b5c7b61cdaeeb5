#include <cmath>

#include "doctest.h"
#include "sten/grad_check.hpp"
#include "sten/graph.hpp"
#include "sten/rng.hpp"

using namespace sten;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

// Runs grad_check over a loss built from every parameter in `ps`.
void expect_grads_match(ParameterStore& ps, const std::function<double(Graph&, bool)>& build,
                        double tol = 1e-6) {
  auto loss = [&](bool with_grads) {
    Graph g;
    return build(g, with_grads);
  };
  GradCheckReport rep = grad_check(loss, ps, 1e-5, tol);
  INFO("worst: ", rep.worst_param, "[", rep.worst_index, "] analytic=", rep.worst_analytic,
       " numeric=", rep.worst_numeric, " rel=", rep.max_rel_err);
  CHECK(rep.passed);
}

}  // namespace

TEST_CASE("affine forward matches a hand computation") {
  Graph g;
  // x = [[1,2],[3,4]], w = [[1,0,2],[0,1,-1]], b = [10,20,30]
  Var x = g.input(Tensor({2, 2}, {1, 2, 3, 4}));
  Var w = g.input(Tensor({2, 3}, {1, 0, 2, 0, 1, -1}));
  Var b = g.input(Tensor({3}, {10, 20, 30}));
  Var y = g.affine(x, w, b);
  const Tensor& t = g.val(y);
  CHECK(t.shape == Shape{2, 3});
  CHECK(t[0] == doctest::Approx(11.0));
  CHECK(t[1] == doctest::Approx(22.0));
  CHECK(t[2] == doctest::Approx(30.0));
  CHECK(t[3] == doctest::Approx(13.0));
  CHECK(t[4] == doctest::Approx(24.0));
  CHECK(t[5] == doctest::Approx(32.0));
}

TEST_CASE("affine rejects mismatched shapes") {
  Graph g;
  Var x = g.input(Tensor({2, 3}));
  Var w = g.input(Tensor({2, 3}));
  Var b = g.input(Tensor({3}));
  CHECK_THROWS_AS(g.affine(x, w, b), ShapeError);
  Var w2 = g.input(Tensor({3, 4}));
  Var b2 = g.input(Tensor({5}));
  CHECK_THROWS_AS(g.affine(x, w2, b2), ShapeError);
}

TEST_CASE("softmax matches the frozen oracle row") {
  Graph g;
  Var z = g.input(Tensor({1, 3}, {1, 2, 3}));
  Var y = g.softmax_masked(z, Tensor::full({1, 3}, 1.0));
  const Tensor& t = g.val(y);
  CHECK(t[0] == doctest::Approx(0.09003057).epsilon(1e-6));
  CHECK(t[1] == doctest::Approx(0.24472847).epsilon(1e-6));
  CHECK(t[2] == doctest::Approx(0.66524096).epsilon(1e-6));
  CHECK(t[0] + t[1] + t[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked softmax zeroes masked slots and renormalizes") {
  Graph g;
  Var z = g.input(Tensor({2, 4}, {5, 1, 2, 3, 1, 1, 1, 1}));
  Tensor mask({2, 4}, {0, 1, 1, 1, 1, 1, 0, 0});
  Var y = g.softmax_masked(z, mask);
  const Tensor& t = g.val(y);
  CHECK(t[0] == 0.0);
  CHECK(t[1] + t[2] + t[3] == doctest::Approx(1.0).epsilon(1e-12));
  // Row 2: two equal valid logits split evenly.
  CHECK(t[4] == doctest::Approx(0.5));
  CHECK(t[5] == doctest::Approx(0.5));
  CHECK(t[6] == 0.0);
  CHECK(t[7] == 0.0);
}

TEST_CASE("softmax all-masked row policy") {
  Graph g;
  Tensor mask({1, 3}, {0, 0, 0});
  Var z = g.input(Tensor({1, 3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.softmax_masked(z, mask, MaskedRows::Error), NumericError);
  Var y = g.softmax_masked(z, mask, MaskedRows::ZeroRow);
  for (double v : g.val(y).v) CHECK(v == 0.0);
}

TEST_CASE("softmax survives extreme logits") {
  Graph g;
  Var z = g.input(Tensor({1, 3}, {1000.0, 999.0, -1000.0}));
  Var y = g.softmax_masked(z, Tensor::full({1, 3}, 1.0));
  const Tensor& t = g.val(y);
  CHECK(t.all_finite());
  CHECK(t[0] + t[1] + t[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pointwise forward values") {
  Graph g;
  Var x = g.input(Tensor({4}, {-2.0, 0.0, 0.5, 2.0}));
  const Tensor& s = g.val(g.sigmoid(x));
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(s[3] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  const Tensor& l = g.val(g.leaky_relu(x));
  CHECK(l[0] == doctest::Approx(-0.02));
  CHECK(l[2] == doctest::Approx(0.5));
  const Tensor& e = g.val(g.exp_neg(x));
  CHECK(e[0] == doctest::Approx(std::exp(2.0)));
  CHECK(e[3] == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("gradients: add sub mul scale") {
  Rng rng(11);
  ParameterStore ps;
  ps.create("a", {3, 4}).value = random_tensor({3, 4}, rng);
  ps.create("b", {3, 4}).value = random_tensor({3, 4}, rng);
  ps.create("s", {3}).value = random_tensor({3}, rng);
  ps.create("c", {1}).value = random_tensor({1}, rng);

  ParameterStore& r = ps;
  expect_grads_match(r, [&](Graph& g, bool wg) {
    Var a = g.param(r.at("a"));
    Var b = g.param(r.at("b"));
    Var s = g.param(r.at("s"));
    Var c = g.param(r.at("c"));
    Var t = g.mul(g.add(a, b), g.sub(a, b));
    t = g.scale_rows(t, s);
    t = g.scale_scalar(t, c);
    t = g.scale_const(t, 0.7);
    Var root = g.sum(t);
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: affine chain with pointwise") {
  Rng rng(12);
  ParameterStore ps;
  ps.create("x", {5, 3}).value = random_tensor({5, 3}, rng);
  ps.create("w1", {3, 4}).value = random_tensor({3, 4}, rng);
  ps.create("b1", {4}).value = random_tensor({4}, rng);
  ps.create("w2", {4, 2}).value = random_tensor({4, 2}, rng);
  ps.create("b2", {2}).value = random_tensor({2}, rng);

  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var x = g.param(ps.at("x"));
    Var h = g.sigmoid(g.affine(x, g.param(ps.at("w1")), g.param(ps.at("b1"))));
    Var y = g.affine(h, g.param(ps.at("w2")), g.param(ps.at("b2")));
    Var root = g.sum(g.mul(y, y));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: leaky_relu away from the kink") {
  ParameterStore ps;
  ps.create("x", {6}).value = Tensor({6}, {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0});
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var x = g.param(ps.at("x"));
    Var root = g.sum(g.mul(g.leaky_relu(x), g.leaky_relu(x)));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: exp_neg") {
  Rng rng(13);
  ParameterStore ps;
  ps.create("x", {2, 5}).value = random_tensor({2, 5}, rng, 0.0, 3.0);
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var root = g.sum(g.exp_neg(g.param(ps.at("x"))));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: masked softmax") {
  Rng rng(14);
  ParameterStore ps;
  ps.create("z", {4, 6}).value = random_tensor({4, 6}, rng, -2.0, 2.0);
  ps.create("v", {4, 6}).value = random_tensor({4, 6}, rng);
  Tensor mask({4, 6});
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 6; ++j) mask.v[r * 6 + j] = (j <= r + 1) ? 1.0 : 0.0;
  }
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var y = g.softmax_masked(g.param(ps.at("z")), mask);
    Var root = g.sum(g.mul(y, g.param(ps.at("v"))));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: batched_affine") {
  Rng rng(15);
  ParameterStore ps;
  ps.create("x", {3, 4, 2}).value = random_tensor({3, 4, 2}, rng);
  ps.create("w", {3, 2, 5}).value = random_tensor({3, 2, 5}, rng);
  ps.create("b", {3, 5}).value = random_tensor({3, 5}, rng);
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var y = g.batched_affine(g.param(ps.at("x")), g.param(ps.at("w")), g.param(ps.at("b")));
    Var root = g.sum(g.mul(y, y));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: pools, rowdot, dot_rows") {
  Rng rng(16);
  ParameterStore ps;
  ps.create("x", {3, 5, 4}).value = random_tensor({3, 5, 4}, rng);
  ps.create("w", {3, 5}).value = random_tensor({3, 5}, rng);
  ps.create("q", {3, 4}).value = random_tensor({3, 4}, rng);
  Tensor mask({3, 5});
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 5; ++j) mask.v[r * 5 + j] = (j >= r) ? 1.0 : 0.0;
  }
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var x = g.param(ps.at("x"));
    Var w = g.param(ps.at("w"));
    Var q = g.param(ps.at("q"));
    Var pooled = g.masked_mean_pool(x, mask);      // [3,4]
    Var weighted = g.weighted_pool(x, w);          // [3,4]
    Var scores = g.rowdot(x, q);                   // [3,5]
    Var d = g.dot_rows(pooled, weighted);          // [3]
    Var root = g.add(g.sum(d), g.sum(g.mul(scores, scores)));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("masked_mean_pool ignores masked rows and zeroes empty rows") {
  Graph g;
  Tensor x({2, 3, 2}, {1, 2, 3, 4, 100, 100, 7, 8, 9, 10, 11, 12});
  Tensor mask({2, 3}, {1, 1, 0, 0, 0, 0});
  Var y = g.masked_mean_pool(g.input(x), mask);
  const Tensor& t = g.val(y);
  CHECK(t.shape == Shape{2, 2});
  CHECK(t[0] == doctest::Approx(2.0));
  CHECK(t[1] == doctest::Approx(3.0));
  CHECK(t[2] == 0.0);
  CHECK(t[3] == 0.0);
}

TEST_CASE("gradients: concat slice reshape") {
  Rng rng(17);
  ParameterStore ps;
  ps.create("a", {4, 2}).value = random_tensor({4, 2}, rng);
  ps.create("b", {4, 3}).value = random_tensor({4, 3}, rng);
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var a = g.param(ps.at("a"));
    Var b = g.param(ps.at("b"));
    Var c = g.concat_last({a, b, a});     // [4,7]
    Var s = g.slice_last(c, 1, 4);        // [4,4]
    Var r2 = g.reshape(s, {2, 8});
    Var root = g.sum(g.mul(r2, r2));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("gradients: embedding scatter-adds repeated ids") {
  Rng rng(18);
  ParameterStore ps;
  ps.create("table", {6, 3}).value = random_tensor({6, 3}, rng);
  std::vector<std::int64_t> ids{0, 2, 2, 5, 0, 1};
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var e = g.embedding(g.param(ps.at("table")), ids, {2, 3});
    Var root = g.sum(g.mul(e, e));
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("embedding rejects out-of-range ids") {
  Graph g;
  Var t = g.input(Tensor({4, 2}));
  CHECK_THROWS_AS(g.embedding(t, {0, 4}, {2}), RangeError);
  CHECK_THROWS_AS(g.embedding(t, {-1}, {1}), RangeError);
}

TEST_CASE("gradients: batch_norm train and infer") {
  Rng rng(19);
  ParameterStore ps;
  ps.create("x", {6, 3}).value = random_tensor({6, 3}, rng);
  ps.create("gamma", {3}).value = random_tensor({3}, rng, 0.5, 1.5);
  ps.create("beta", {3}).value = random_tensor({3}, rng);

  SUBCASE("train mode") {
    expect_grads_match(ps, [&](Graph& g, bool wg) {
      BatchNormState state(3);
      Var y = g.batch_norm(g.param(ps.at("x")), g.param(ps.at("gamma")), g.param(ps.at("beta")),
                           state, BnMode::Train);
      Var root = g.sum(g.mul(y, y));
      if (wg) g.backward(root);
      return g.val(root)[0];
    }, 1e-5);
  }
  SUBCASE("infer mode") {
    BatchNormState state(3);
    for (std::size_t j = 0; j < 3; ++j) {
      state.running_mean.v[j] = 0.1 * static_cast<double>(j);
      state.running_var.v[j] = 1.0 + 0.2 * static_cast<double>(j);
    }
    expect_grads_match(ps, [&](Graph& g, bool wg) {
      Var y = g.batch_norm(g.param(ps.at("x")), g.param(ps.at("gamma")), g.param(ps.at("beta")),
                           state, BnMode::Infer);
      Var root = g.sum(g.mul(y, y));
      if (wg) g.backward(root);
      return g.val(root)[0];
    });
  }
}

TEST_CASE("batch_norm train normalizes the batch and updates running stats") {
  Graph g;
  Tensor x({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  BatchNormState state(2);
  Var y = g.batch_norm(g.input(x), g.input(Tensor::full({2}, 1.0)), g.input(Tensor({2})), state,
                       BnMode::Train);
  const Tensor& t = g.val(y);
  double m0 = 0.0, v0 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) m0 += t.v[i * 2];
  for (std::size_t i = 0; i < 4; ++i) v0 += t.v[i * 2] * t.v[i * 2];
  CHECK(m0 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(v0 / 4.0 == doctest::Approx(1.0).epsilon(1e-3));  // biased variance, eps shrinks it
  // running = 0.99 * initial + 0.01 * batch
  CHECK(state.running_mean[0] == doctest::Approx(0.99 * 0.0 + 0.01 * 2.5));
  CHECK(state.running_var[1] == doctest::Approx(0.99 * 1.0 + 0.01 * 125.0));
}

TEST_CASE("batch_norm train rejects tiny batches") {
  Graph g;
  BatchNormState state(2);
  Var x = g.input(Tensor({1, 2}));
  Var gamma = g.input(Tensor::full({2}, 1.0));
  Var beta = g.input(Tensor({2}));
  CHECK_THROWS_AS(g.batch_norm(x, gamma, beta, state, BnMode::Train), RangeError);
  CHECK_NOTHROW(g.batch_norm(x, gamma, beta, state, BnMode::Infer));
}

TEST_CASE("gradients: bce_with_logits") {
  Rng rng(20);
  ParameterStore ps;
  ps.create("z", {8}).value = random_tensor({8}, rng, -3.0, 3.0);
  Tensor labels({8}, {1, 0, 1, 1, 0, 0, 1, 0});
  expect_grads_match(ps, [&](Graph& g, bool wg) {
    Var root = g.bce_with_logits(g.param(ps.at("z")), labels);
    if (wg) g.backward(root);
    return g.val(root)[0];
  });
}

TEST_CASE("bce_with_logits at zero logit equals ln 2") {
  Graph g;
  Var root = g.bce_with_logits(g.input(Tensor({1}, {0.0})), Tensor({1}, {1.0}));
  CHECK(g.val(root)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bce_with_logits is finite at extreme logits") {
  Graph g;
  Var root = g.bce_with_logits(g.input(Tensor({2}, {900.0, -900.0})), Tensor({2}, {0.0, 1.0}));
  CHECK(std::isfinite(g.val(root)[0]));
  CHECK(g.val(root)[0] == doctest::Approx(900.0));
}

TEST_CASE("backward accumulates into parameter gradients across graphs") {
  ParameterStore ps;
  Parameter& p = ps.create("w", {2});
  p.value = Tensor({2}, {1.0, 2.0});
  for (int pass = 0; pass < 2; ++pass) {
    Graph g;
    Var w = g.param(p);
    Var root = g.sum(g.mul(w, w));
    g.backward(root);
  }
  // d/dw sum(w*w) = 2w, accumulated twice
  CHECK(p.gradient[0] == doctest::Approx(4.0));
  CHECK(p.gradient[1] == doctest::Approx(8.0));
  ps.zero_gradients();
  CHECK(p.gradient[0] == 0.0);
}

TEST_CASE("backward requires a scalar root") {
  Graph g;
  Var x = g.leaf(Tensor({2, 2}));
  CHECK_THROWS_AS(g.backward(x), ShapeError);
}

TEST_CASE("same value used twice accumulates both paths") {
  ParameterStore ps;
  Parameter& p = ps.create("w", {1});
  p.value = Tensor({1}, {3.0});
  Graph g;
  Var w = g.param(p);
  Var root = g.sum(g.mul(w, w));  // w^2, dw = 2w = 6
  g.backward(root);
  CHECK(p.gradient[0] == doctest::Approx(6.0));
}
