#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dtii/model/world_model.hpp"
#include "support/gradcheck.hpp"
#include "support/scalar_model.hpp"

using namespace dtii;
using namespace dtii::model;
using core::Rng;
using core::Tape;
using testsupport::Scalar;
using testsupport::sig;

namespace {

WorldModelConfig tiny_config() {
  WorldModelConfig c;
  c.obs_shape = {1, 1, 2};
  c.actions = 1;
  c.deter = 2;
  c.groups = 1;
  c.classes = 2;
  c.units = 2;
  c.ensemble = 2;
  return c;
}

WorldModelConfig small_config() {
  WorldModelConfig c;
  c.obs_shape = {3, 3, 2};
  c.deter = 6;
  c.groups = 2;
  c.classes = 3;
  c.units = 5;
  c.ensemble = 3;
  return c;
}

ArrayF random_obs(const WorldModelConfig& c, Rng& rng) {
  ArrayF x(c.obs_shape);
  for (auto& v : x.vec()) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
  return x;
}

}  // namespace

TEST_CASE("zero params give uniform distributions and midpoint outputs") {
  auto cfg = small_config();
  auto p = WorldModelParams::zeros(cfg);
  Rng rng(1);
  auto out = observe_step(p, initial_state(cfg), action_onehot(1, cfg.actions), random_obs(cfg, rng), rng,
                          LatentSelect::Sample);
  const auto probs = core::categorical_probs(out.prior_logits, cfg.classes);
  for (float v : probs.vec()) CHECK(v == doctest::Approx(1.0 / 3));
  CHECK(out.prior_logits == out.posterior_logits);
  auto x = decode(p, out.state);
  CHECK(x.shape() == cfg.obs_shape);
  for (float v : x.vec()) CHECK(v == 0.5f);
  CHECK(predict_reward(p, out.state) == 0.0);
  CHECK(predict_continue(p, out.state) == 0.5);
}

TEST_CASE("parameter count matches layout") {
  auto c = tiny_config();
  auto p = WorldModelParams::init(c, 3);
  // GRU: (2+1)*6 + 6 + 2*4 + 2*2; MLP(in,2,out): in*2 + 2 + 2*out + out.
  auto mlp = [](int in, int out) { return in * 2 + 2 + 2 * out + out; };
  const std::size_t expect = 18 + 6 + 8 + 4 + mlp(4, 2) + mlp(2, 2) + mlp(4, 1) + mlp(4, 1) + mlp(4, 2) + 2 * mlp(2, 2);
  CHECK(p.parameter_count() == expect);
  CHECK(p.ensemble_indices().size() == 8u);
  CHECK(p.main_indices().size() + p.ensemble_indices().size() == p.set.size());
  auto bad = c;
  bad.ensemble = 1;
  CHECK_THROWS(WorldModelParams::zeros(bad));
}

TEST_CASE("hand-sized model matches scalar evaluation") {
  auto c = tiny_config();
  auto p = WorldModelParams::init(c, 11);
  for (auto& a : p.set.arrays)
    if (a.shape().size() == 1)
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.1f * static_cast<float>(i + 1);
  Scalar s{p.set};
  ModelState prev{ArrayF::matrix(1, 2, {0.3f, -0.2f}), ArrayF::matrix(1, 2, {0.0f, 1.0f})};
  ArrayF obs({1, 1, 2}, std::vector<float>{1.0f, 0.0f});
  Rng rng(0);
  auto out = observe_step(p, prev, action_onehot(0, 1), obs, rng, LatentSelect::Mode);

  const auto h = s.gru({0.3, -0.2}, {0.0, 1.0, 1.0});
  CHECK(out.state.h[0] == doctest::Approx(h[0]).epsilon(1e-5));
  CHECK(out.state.h[1] == doctest::Approx(h[1]).epsilon(1e-5));
  const auto post = s.mlp("enc", {h[0], h[1], 1.0, 0.0});
  const auto pri = s.mlp("prior", {h[0], h[1]});
  for (int i = 0; i < 2; ++i) {
    CHECK(out.posterior_logits[i] == doctest::Approx(post[i]).epsilon(1e-5));
    CHECK(out.prior_logits[i] == doctest::Approx(pri[i]).epsilon(1e-5));
  }
  const int mode = post[1] > post[0] ? 1 : 0;
  CHECK(out.state.z[mode] == 1.0f);
  CHECK(out.state.z[1 - mode] == 0.0f);

  const std::vector<double> feat = {h[0], h[1], mode == 0 ? 1.0 : 0.0, mode == 1 ? 1.0 : 0.0};
  const auto x = decode(p, out.state);
  const auto dec = s.mlp("dec", feat);
  CHECK(x[0] == doctest::Approx(sig(dec[0])).epsilon(1e-5));
  CHECK(x[1] == doctest::Approx(sig(dec[1])).epsilon(1e-5));
  CHECK(predict_reward(p, out.state) == doctest::Approx(s.mlp("reward", feat)[0]).epsilon(1e-5));
  CHECK(predict_continue(p, out.state) == doctest::Approx(sig(s.mlp("cont", feat)[0])).epsilon(1e-5));

  const auto ens = ensemble_predict(p, out.state.h);
  for (int k = 0; k < 2; ++k) {
    const auto l = s.mlp("ens" + std::to_string(k), {h[0], h[1]});
    const double p1 = 1.0 / (1.0 + std::exp(l[0] - l[1]));
    CHECK(ens[k][1] == doctest::Approx(p1).epsilon(1e-5));
  }
}

TEST_CASE("observe_step is deterministic and validates input") {
  auto cfg = small_config();
  auto p = WorldModelParams::init(cfg, 5);
  Rng data(2);
  auto obs = random_obs(cfg, data);
  Rng r1(9), r2(9);
  auto a = observe_step(p, initial_state(cfg), action_onehot(-1, 3), obs, r1, LatentSelect::Sample);
  auto b = observe_step(p, initial_state(cfg), action_onehot(-1, 3), obs, r2, LatentSelect::Sample);
  CHECK(a.state == b.state);
  CHECK(a.posterior_logits == b.posterior_logits);
  CHECK_THROWS_AS(observe_step(p, initial_state(cfg), action_onehot(0, 3), ArrayF({4}), r1, LatentSelect::Mode),
                  core::ShapeError);
  auto nan_obs = obs;
  nan_obs[0] = std::nanf("");
  CHECK_THROWS(observe_step(p, initial_state(cfg), action_onehot(0, 3), nan_obs, r1, LatentSelect::Mode));
}

TEST_CASE("states stay one-hot and finite") {
  auto cfg = small_config();
  auto p = WorldModelParams::init(cfg, 6);
  Rng rng(4);
  ModelState s = initial_state(cfg);
  for (int t = 0; t < 50; ++t) {
    auto out = observe_step(p, s, action_onehot(rng.below(3), 3), random_obs(cfg, rng), rng,
                            t % 2 ? LatentSelect::Mode : LatentSelect::Sample);
    s = t % 3 ? out.state : imagine_step(p, out.state, action_onehot(rng.below(3), 3), rng);
    CHECK(s.h.all_finite());
    for (int g = 0; g < cfg.groups; ++g) {
      float total = 0;
      for (int c = 0; c < cfg.classes; ++c) {
        const float v = s.z[g * cfg.classes + c];
        CHECK((v == 0.0f || v == 1.0f));
        total += v;
      }
      CHECK(total == 1.0f);
    }
    const double cont = predict_continue(p, s);
    CHECK(cont >= 0.0);
    CHECK(cont <= 1.0);
  }
}

TEST_CASE("imagined latents follow the prior") {
  auto cfg = small_config();
  auto p = WorldModelParams::init(cfg, 8);
  ModelState s{ArrayF({1, cfg.deter}, 0.2f), core::categorical_mode(ArrayF({1, cfg.latent_dim()}, 0.0f), 3)};
  const auto act = action_onehot(2, 3);

  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  auto h = sequence_step(g, tape.constant(s.h), tape.constant(s.z), tape.constant(act));
  const auto probs = core::categorical_probs(prior_dist(g, h).logits.value(), cfg.classes);

  const int n = 10000;
  std::vector<int> counts(cfg.latent_dim(), 0);
  for (int i = 0; i < n; ++i) {
    Rng rng(static_cast<std::uint64_t>(i));
    auto next = imagine_step(p, s, act, rng);
    CHECK(next.h == h.value());
    for (int j = 0; j < cfg.latent_dim(); ++j) counts[j] += next.z[j] > 0.5f;
  }
  for (int j = 0; j < cfg.latent_dim(); ++j) {
    const double pj = probs[j];
    CHECK(std::abs(counts[j] / double(n) - pj) <= 3.0 * std::sqrt(pj * (1 - pj) / n) + 1e-9);
  }
}

TEST_CASE("saturated prior gives deterministic imagination") {
  auto cfg = small_config();
  auto p = WorldModelParams::zeros(cfg);
  auto& b = p.set["prior.b1"];
  for (int g = 0; g < cfg.groups; ++g) b[g * cfg.classes + 1] = 200.0f;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto s = imagine_step(p, initial_state(cfg), action_onehot(0, 3), rng);
    for (int g = 0; g < cfg.groups; ++g) CHECK(s.z[g * cfg.classes + 1] == 1.0f);
  }
}

TEST_CASE("gradient reaches the starting recurrent state through imagination") {
  auto cfg = small_config();
  auto p = WorldModelParams::init(cfg, 21);
  Rng data(3);
  core::ArrayD h0({1, cfg.deter});
  for (auto& v : h0.vec()) v = data.normal() * 0.5;
  const auto z0 = core::categorical_mode(core::ArrayD({1, cfg.latent_dim()}, 0.0), cfg.classes);
  auto res = testing::check_gradients(
      {h0}, [&](Tape<double>& tape, const std::vector<Var<double>>& in) {
        auto g = bind_world_model(tape, p, false);
        auto h = in[0];
        // Latents are held fixed: a straight-through sample has no finite-difference counterpart.
        auto z = tape.constant(z0);
        for (int j = 0; j < 3; ++j)
          h = sequence_step(g, h, z, tape.constant(action_onehot(j % 3, 3).cast<double>()));
        return core::entropy_categorical(prior_dist(g, h));
      });
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.checked > 0);
}

TEST_CASE("identical ensemble members agree and rows sum to G") {
  auto cfg = small_config();
  auto p = WorldModelParams::init(cfg, 2);
  for (int k = 1; k < cfg.ensemble; ++k)
    for (const char* part : {".w0", ".b0", ".w1", ".b1"})
      p.set["ens" + std::to_string(k) + part] = p.set[std::string("ens0") + part];
  ArrayF h({4, cfg.deter});
  Rng rng(1);
  for (auto& v : h.vec()) v = static_cast<float>(rng.normal());
  auto out = ensemble_predict(p, h);
  REQUIRE(out.size() == 3u);
  for (int k = 1; k < 3; ++k) CHECK(out[k] == out[0]);
  for (int r = 0; r < 4; ++r) {
    double total = 0;
    for (int j = 0; j < cfg.latent_dim(); ++j) total += out[0].at(r, j);
    CHECK(total == doctest::Approx(cfg.groups).epsilon(1e-6));
  }
}
