#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dtii/core/adam.hpp"
#include "dtii/core/distributions.hpp"
#include "dtii/core/kernels.hpp"
#include "support/gradcheck.hpp"
#include "support/random_graph.hpp"

using namespace dtii::core;
using dtii::testing::check_gradients;
using dtii::testing::random_array;

TEST_CASE("affine forward and bias gradient") {
  Tape<double> t;
  auto x = t.leaf(ArrayD::row({1, 0}));
  auto w = t.leaf(ArrayD::matrix(2, 2, {1, 0, 0, 1}));
  auto b = t.leaf(ArrayD::row({0, 0}));
  auto y = affine(x, w, b);
  CHECK(y.value().vec() == std::vector<double>{1, 0});

  Tape<double> t2;
  auto x2 = t2.leaf(ArrayD::row({1, 2}));
  auto w2 = t2.leaf(ArrayD::matrix(2, 2, {1, 1, 0, 1}));
  auto b2 = t2.leaf(ArrayD::row({1, 0}));
  auto y2 = affine(x2, w2, b2);
  CHECK(y2.value().vec() == std::vector<double>{2, 3});
  t2.backward(sum(y2));
  CHECK(b2.grad().vec() == std::vector<double>{1, 1});
}

TEST_CASE("affine rejects mismatched shapes with dimensions in the message") {
  Tape<float> t;
  auto x = t.leaf(ArrayF({1, 3}));
  auto w = t.leaf(ArrayF({2, 2}));
  auto b = t.leaf(ArrayF({2}));
  try {
    affine(x, w, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[1,3]") != std::string::npos);
    CHECK(std::string(e.what()).find("[2,2]") != std::string::npos);
  }
  auto b3 = t.leaf(ArrayF({3}));
  auto w23 = t.leaf(ArrayF({3, 2}));
  CHECK_THROWS_AS(affine(x, w23, b3), ShapeError);
}

namespace {

GruParams<double> gru_leaves(Tape<double>& t, const ArrayD& w_in, const ArrayD& b_in, const ArrayD& w_ru,
                             const ArrayD& w_c) {
  return {t.leaf(w_in), t.leaf(b_in), t.leaf(w_ru), t.leaf(w_c)};
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("gated recurrent cell: zero everything gives zero state") {
  Tape<double> t;
  auto h = t.leaf(ArrayD({1, 4}));
  auto x = t.leaf(ArrayD({1, 3}));
  auto p = gru_leaves(t, ArrayD({3, 12}), ArrayD({12}), ArrayD({4, 8}), ArrayD({4, 4}));
  auto out = gated_recurrent_cell(h, x, p);
  for (double v : out.value().vec()) CHECK(v == 0.0);
}

TEST_CASE("gated recurrent cell matches hand evaluation on a 2-unit cell") {
  const ArrayD w_in = ArrayD::matrix(1, 6, {0.5, -0.3, 0.2, 0.7, -1.1, 0.4});
  const ArrayD b_in({6}, {0.1, 0.0, -0.2, 0.05, 0.3, -0.1});
  const ArrayD w_ru = ArrayD::matrix(2, 4, {0.2, -0.4, 0.6, 0.1, -0.5, 0.3, 0.2, -0.2});
  const ArrayD w_c = ArrayD::matrix(2, 2, {0.9, -0.6, 0.4, 0.8});
  const double x = 0.8, h0 = 0.25, h1 = -0.4;

  // Scalar evaluation of the gate equations.
  const double r0 = sig(x * 0.5 + 0.1 + h0 * 0.2 + h1 * -0.5);
  const double r1 = sig(x * -0.3 + 0.0 + h0 * -0.4 + h1 * 0.3);
  const double u0 = sig(x * 0.2 - 0.2 + h0 * 0.6 + h1 * 0.2);
  const double u1 = sig(x * 0.7 + 0.05 + h0 * 0.1 + h1 * -0.2);
  const double c0 = std::tanh(x * -1.1 + 0.3 + r0 * h0 * 0.9 + r1 * h1 * 0.4);
  const double c1 = std::tanh(x * 0.4 - 0.1 + r0 * h0 * -0.6 + r1 * h1 * 0.8);
  const double e0 = h0 + u0 * (c0 - h0);
  const double e1 = h1 + u1 * (c1 - h1);

  Tape<double> t;
  auto out = gated_recurrent_cell(t.leaf(ArrayD::row({h0, h1})), t.leaf(ArrayD::row({x})),
                                  gru_leaves(t, w_in, b_in, w_ru, w_c));
  CHECK(out.value()[0] == doctest::Approx(e0).epsilon(1e-12));
  CHECK(out.value()[1] == doctest::Approx(e1).epsilon(1e-12));
  CHECK(std::abs(out.value()[0]) < 1.0);
}

TEST_CASE("gated recurrent cell: d h'/d h_prev agrees with central differences") {
  Rng rng(7);
  const int hw = 5, in = 4;
  std::vector<ArrayD> inputs = {random_array({2, hw}, rng, 0.5), random_array({2, in}, rng),
                                random_array({in, 3 * hw}, rng, 0.5), random_array({3 * hw}, rng, 0.2),
                                random_array({hw, 2 * hw}, rng, 0.5), random_array({hw, hw}, rng, 0.5),
                                random_array({2, hw}, rng)};
  auto res = check_gradients(inputs, [](Tape<double>&, const std::vector<Var<double>>& v) {
    GruParams<double> p{v[2], v[3], v[4], v[5]};
    return sum(mul(gated_recurrent_cell(v[0], v[1], p), v[6]));
  });
  CHECK(res.checked > 100);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gated recurrent cell rejects width mismatch") {
  Tape<double> t;
  auto p = gru_leaves(t, ArrayD({3, 12}), ArrayD({12}), ArrayD({4, 8}), ArrayD({4, 4}));
  CHECK_THROWS_AS(gated_recurrent_cell(t.leaf(ArrayD({1, 3})), t.leaf(ArrayD({1, 3})), p), ShapeError);
  CHECK_THROWS_AS(gated_recurrent_cell(t.leaf(ArrayD({1, 4})), t.leaf(ArrayD({1, 2})), p), ShapeError);
}

TEST_CASE("categorical sampling") {
  SUBCASE("saturated logits give a deterministic one-hot") {
    Tape<float> t;
    CategoricalDist<float> d(t.leaf(ArrayF::row({0.f, 1e6f, 0.f, 1e6f, 0.f, 0.f})), 3);
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
      auto s = categorical_sample_st(d, rng);
      CHECK(s.value().vec() == std::vector<float>{0, 1, 0, 1, 0, 0});
    }
  }
  SUBCASE("same seed gives the same sample") {
    Tape<float> t;
    Rng init(3);
    ArrayF logits({1, 32});
    for (auto& v : logits.vec()) v = static_cast<float>(init.normal());
    CategoricalDist<float> d(t.leaf(logits), 4);
    Rng a(99), b(99);
    CHECK(categorical_sample_st(d, a).value() == categorical_sample_st(d, b).value());
  }
  SUBCASE("empirical frequencies match softmax within 3 sigma") {
    const std::vector<double> logits = {0.3, -1.0, 1.2, 0.0};
    double z = 0;
    for (double l : logits) z += std::exp(l);
    Tape<double> t;
    CategoricalDist<double> d(t.leaf(ArrayD({1, 4}, logits)), 4);
    auto probs = categorical_probs(d.logits.value(), 4);
    std::vector<int> counts(4, 0);
    Rng rng(2024);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      auto s = categorical_draw(probs, 4, rng);
      for (int c = 0; c < 4; ++c) counts[c] += s[c] > 0.5;
    }
    for (int c = 0; c < 4; ++c) {
      const double p = std::exp(logits[c]) / z;
      const double sigma = std::sqrt(n * p * (1 - p));
      CHECK(std::abs(counts[c] - n * p) < 3 * sigma);
    }
  }
  SUBCASE("straight-through gradient equals the softmax gradient") {
    Tape<double> t;
    auto logits = t.leaf(ArrayD::row({0.2, -0.4, 0.9}));
    Rng rng(5);
    auto s = categorical_sample_st(CategoricalDist<double>(logits, 3), rng);
    auto w = t.constant(ArrayD::row({1.0, 2.0, -1.0}));
    t.backward(sum(mul(s, w)));
    Tape<double> t2;
    auto l2 = t2.leaf(ArrayD::row({0.2, -0.4, 0.9}));
    t2.backward(sum(mul(softmax_groups(l2, 3), t2.constant(ArrayD::row({1.0, 2.0, -1.0})))));
    for (int i = 0; i < 3; ++i) CHECK(logits.grad()[i] == doctest::Approx(l2.grad()[i]));
  }
}

TEST_CASE("categorical mode") {
  CHECK(categorical_mode(ArrayF::row({0.1f, 0.9f}), 2).vec() == std::vector<float>{0, 1});
  CHECK(categorical_mode(ArrayF::row({0.5f, 0.5f}), 2).vec() == std::vector<float>{1, 0});
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    ArrayF l({2, 12});
    for (auto& v : l.vec()) v = static_cast<float>(rng.normal());
    ArrayF shifted = l;
    for (int g = 0; g < 6; ++g) {
      const float c = static_cast<float>(3 * rng.normal());
      for (int k = 0; k < 4; ++k) shifted[g * 4 + k] += c;
    }
    CHECK(categorical_mode(l, 4) == categorical_mode(shifted, 4));
  }
}

namespace {

CategoricalDist<double> dist_from_probs(Tape<double>& t, std::vector<double> probs, int classes) {
  for (auto& p : probs) p = std::log(p);
  return {t.leaf(ArrayD({1, static_cast<int>(probs.size())}, probs)), classes};
}

}  // namespace

TEST_CASE("categorical KL") {
  Tape<double> t;
  auto q = dist_from_probs(t, {0.75, 0.25}, 2);
  auto p = dist_from_probs(t, {0.5, 0.5}, 2);
  // Oracle: direct summation of q (ln q - ln p).
  const double oracle = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  CHECK(oracle == doctest::Approx(0.130812).epsilon(1e-5));
  CHECK(kl_categorical(q, p).item() == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(kl_categorical(q, q).item() == 0.0);

  CHECK_THROWS_AS(kl_categorical(q, dist_from_probs(t, {0.2, 0.3, 0.5}, 3)), ShapeError);
}

TEST_CASE("categorical KL properties over random logit pairs") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    Tape<double> t;
    const int classes = 2 + rng.below(7);
    const int groups = 1 + rng.below(4);
    CategoricalDist<double> q(t.leaf(random_array({1, classes * groups}, rng, 3.0)), classes);
    CategoricalDist<double> p(t.leaf(random_array({1, classes * groups}, rng, 3.0)), classes);
    CHECK(kl_categorical(q, p).item() >= 0.0);
    CHECK(std::abs(kl_categorical(q, q).item()) <= 1e-9);
  }
}

TEST_CASE("categorical entropy") {
  Tape<double> t;
  CHECK(entropy_categorical(CategoricalDist<double>(t.leaf(ArrayD::row({1e6, 0, 0, 0})), 4)).item() <= 1e-6);
  CHECK(entropy_categorical(CategoricalDist<double>(t.leaf(ArrayD({1, 64}, 0.0)), 8)).item() ==
        doctest::Approx(8 * std::log(8.0)));
  const double oracle = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(oracle == doctest::Approx(0.562335).epsilon(1e-5));
  CHECK(entropy_categorical(dist_from_probs(t, {0.75, 0.25}, 2)).item() == doctest::Approx(oracle).epsilon(1e-12));

  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    Tape<double> tt;
    const int classes = 2 + rng.below(7);
    const int groups = 1 + rng.below(3);
    CategoricalDist<double> d(tt.leaf(random_array({1, classes * groups}, rng, 2.0)), classes);
    const double e = entropy_categorical(d).item();
    CHECK(e >= 0.0);
    CHECK(e <= groups * std::log(static_cast<double>(classes)) + 1e-12);
  }
}

TEST_CASE("backward basics") {
  Tape<double> t;
  auto x = t.leaf(ArrayD::scalar(3.0));
  t.backward(x);
  CHECK(x.grad()[0] == 1.0);

  Tape<double> t2;
  auto y = t2.leaf(ArrayD::scalar(3.0));
  auto loss = square(y);
  t2.backward(loss);
  CHECK(y.grad()[0] == 6.0);
  CHECK(loss.grad()[0] == 1.0);

  Tape<double> t3;
  auto v = t3.leaf(ArrayD::row({1, 2}));
  CHECK_THROWS_AS(t3.backward(v), ShapeError);
}

TEST_CASE("backward sums contributions across paths") {
  Tape<double> t;
  auto x = t.leaf(ArrayD::scalar(2.0));
  auto loss = add(mul(x, x), scale(x, 3.0));
  t.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("random composite graphs agree with finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = dtii::testing::make_random_graph(seed);
    CAPTURE(seed);
    CAPTURE(g.description);
    auto res = check_gradients(g.inputs, g.builder());
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("grouped ops agree with finite differences") {
  Rng rng(31);
  std::vector<ArrayD> inputs = {random_array({3, 8}, rng), random_array({3, 8}, rng), random_array({3, 2}, rng)};
  auto res = check_gradients(inputs, [](Tape<double>&, const std::vector<Var<double>>& v) {
    auto lsm = log_softmax_groups(v[0], 4);
    auto kl = kl_categorical_groups(CategoricalDist<double>(v[0], 4), CategoricalDist<double>(v[1], 4));
    auto ent = entropy_categorical_groups(CategoricalDist<double>(v[1], 4));
    auto rep = repeat_rows(mean_rows(v[2]), 3);
    return add(add(sum(mul(kl, rep)), sum(mul(ent, ent))), mean(mul(lsm, v[1])));
  });
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("clamp_min passes no gradient below the floor") {
  Tape<double> t;
  auto x = t.leaf(ArrayD::row({0.5, 2.5}));
  t.backward(sum(clamp_min(x, 1.0)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("adam update") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  SUBCASE("zero gradient from fresh moments leaves params unchanged") {
    ArrayF p = ArrayF::row({1.f, -2.f});
    ArrayF g({1, 2}, 0.f);
    std::vector<ArrayF*> ps = {&p};
    std::vector<const ArrayF*> gs = {&g};
    AdamState st;
    st.init_like(ps);
    adam_update(ps, gs, st, cfg);
    CHECK(p.vec() == std::vector<float>{1.f, -2.f});
  }
  SUBCASE("zero gradient decays existing moments") {
    ArrayF p = ArrayF::row({1.f, -2.f});
    ArrayF g({1, 2}, 0.f);
    std::vector<ArrayF*> ps = {&p};
    std::vector<const ArrayF*> gs = {&g};
    AdamState st;
    st.init_like(ps);
    st.m[0].fill(0.5f);
    st.v[0].fill(0.25f);
    adam_update(ps, gs, st, cfg);
    CHECK(st.m[0][0] == doctest::Approx(0.45f));
    CHECK(st.v[0][0] == doctest::Approx(0.25f * 0.999f));
  }
  SUBCASE("constant gradient moves by about lr on the first step") {
    // m1 = (1-b1) g, v1 = (1-b2) g^2, corrected ratio = g / |g| -> step = lr.
    ArrayF p = ArrayF::row({1.f, -2.f});
    ArrayF g = ArrayF::row({0.3f, -4.f});
    std::vector<ArrayF*> ps = {&p};
    std::vector<const ArrayF*> gs = {&g};
    AdamState st;
    st.init_like(ps);
    adam_update(ps, gs, st, cfg);
    CHECK(p[0] == doctest::Approx(1.f - 0.01f).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(-2.f + 0.01f).epsilon(1e-5));
  }
  SUBCASE("non-finite gradient skips only that array") {
    ArrayF p1 = ArrayF::row({1.f}), p2 = ArrayF::row({1.f});
    ArrayF g1 = ArrayF::row({std::nanf("")}), g2 = ArrayF::row({1.f});
    std::vector<ArrayF*> ps = {&p1, &p2};
    std::vector<const ArrayF*> gs = {&g1, &g2};
    AdamState st;
    st.init_like(ps);
    auto skipped = adam_update(ps, gs, st, cfg);
    REQUIRE(skipped.size() == 1);
    CHECK(skipped[0] == 0);
    CHECK(p1[0] == 1.f);
    CHECK(p2[0] < 1.f);
  }
  SUBCASE("identical runs are bit-identical") {
    auto run = [&] {
      Rng rng(4);
      ArrayF p({4, 4});
      for (auto& v : p.vec()) v = static_cast<float>(rng.normal());
      std::vector<ArrayF*> ps = {&p};
      AdamState st;
      st.init_like(ps);
      for (int k = 0; k < 50; ++k) {
        ArrayF g(p.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = p[i] * 0.5f + static_cast<float>(rng.normal());
        std::vector<const ArrayF*> gs = {&g};
        adam_update(ps, gs, st, cfg);
      }
      return p;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(41);
  for (auto [m, n, k] : std::vector<std::tuple<int, int, int>>{{3, 5, 7}, {64, 96, 80}, {128, 64, 200}}) {
    ArrayF a({m, k}), b({k, n}), g({m, n});
    for (auto* arr : {&a, &b, &g})
      for (auto& v : arr->vec()) v = static_cast<float>(rng.normal());
    ArrayF c1({m, n}), c2({m, n});
    dtii::kernels::serial::gemm_nn(m, n, k, a.data(), b.data(), c1.data(), false);
    dtii::kernels::gemm_nn(m, n, k, a.data(), b.data(), c2.data(), false);
    CHECK(c1 == c2);
    ArrayF d1({k, n}), d2({k, n});
    dtii::kernels::serial::gemm_tn(m, n, k, a.data(), g.data(), d1.data(), false);
    dtii::kernels::gemm_tn(m, n, k, a.data(), g.data(), d2.data(), false);
    CHECK(d1 == d2);
    ArrayF e1({m, k}), e2({m, k});
    dtii::kernels::serial::gemm_nt(m, n, k, g.data(), b.data(), e1.data(), false);
    dtii::kernels::gemm_nt(m, n, k, g.data(), b.data(), e2.data(), false);
    CHECK(e1 == e2);
  }
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    Rng rng(5);
    Tape<float> t;
    auto x = t.leaf(ArrayF({4, 6}));
    for (auto& v : t.node(x.id).value.vec()) v = static_cast<float>(rng.normal());
    auto w = t.leaf(ArrayF({6, 8}));
    for (auto& v : t.node(w.id).value.vec()) v = static_cast<float>(rng.normal());
    auto b = t.leaf(ArrayF({8}, 0.1f));
    Rng srng(9);
    auto s = categorical_sample_st(CategoricalDist<float>(affine(x, w, b), 4), srng);
    auto loss = sum(mul(s, tanh(affine(x, w, b))));
    t.backward(loss);
    return std::make_pair(loss.item(), w.grad());
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
