#include "dtii/model/world_model.hpp"

#include <stdexcept>

namespace dtii::model {

using core::Rng;
using core::Tape;

void WorldModelConfig::validate() const {
  if (obs_shape.empty()) throw std::invalid_argument("world model: empty observation shape");
  core::shape_numel(obs_shape);
  if (actions < 1 || deter < 1 || groups < 1 || units < 1)
    throw std::invalid_argument("world model: dimensions must be positive");
  if (classes < 2) throw std::invalid_argument("world model: need at least 2 classes per group");
  if (ensemble < 2) throw std::invalid_argument("world model: ensemble needs K >= 2");
}

namespace {

struct Layout {
  std::string name;
  int in;
  int out;
};

std::vector<Layout> mlp_layout(const std::string& prefix, int in, int units, int out) {
  return {{prefix + ".w0", in, units}, {prefix + ".b0", 0, units}, {prefix + ".w1", units, out},
          {prefix + ".b1", 0, out}};
}

/// Arrays in bind order. `in == 0` marks a bias vector.
std::vector<Layout> layout(const WorldModelConfig& c) {
  const int h = c.deter;
  std::vector<Layout> out = {{"seq.w_in", c.latent_dim() + c.actions, 3 * h},
                             {"seq.b_in", 0, 3 * h},
                             {"seq.w_ru", h, 2 * h},
                             {"seq.w_c", h, h}};
  auto append = [&out](std::vector<Layout> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(mlp_layout("enc", h + c.obs_dim(), c.units, c.latent_dim()));
  append(mlp_layout("prior", h, c.units, c.latent_dim()));
  append(mlp_layout("reward", c.feature_dim(), c.units, 1));
  append(mlp_layout("cont", c.feature_dim(), c.units, 1));
  append(mlp_layout("dec", c.feature_dim(), c.units, c.obs_dim()));
  for (int k = 0; k < c.ensemble; ++k) append(mlp_layout("ens" + std::to_string(k), h, c.units, c.latent_dim()));
  return out;
}

ArrayF shaped(const Layout& l) { return l.in == 0 ? ArrayF({l.out}, 0.0f) : ArrayF({l.in, l.out}, 0.0f); }

}  // namespace

WorldModelParams WorldModelParams::zeros(const WorldModelConfig& cfg) {
  cfg.validate();
  WorldModelParams p;
  p.config = cfg;
  for (const auto& l : layout(cfg)) p.set.add(l.name, shaped(l));
  return p;
}

WorldModelParams WorldModelParams::init(const WorldModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldModelParams p;
  p.config = cfg;
  Rng rng(seed);
  for (const auto& l : layout(cfg)) p.set.add(l.name, l.in == 0 ? shaped(l) : core::scaled_normal(l.in, l.out, rng));
  return p;
}

std::vector<std::size_t> WorldModelParams::ensemble_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.names[i].rfind("ens", 0) == 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> WorldModelParams::main_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.names[i].rfind("ens", 0) != 0) out.push_back(i);
  return out;
}

ModelState initial_state(const WorldModelConfig& cfg, int rows) {
  return {ArrayF({rows, cfg.deter}, 0.0f), ArrayF({rows, cfg.latent_dim()}, 0.0f)};
}

ArrayF action_onehot(int action, int count) {
  ArrayF a({1, count}, 0.0f);
  if (action >= count) throw std::out_of_range("action " + std::to_string(action) + " out of range");
  if (action >= 0) a[action] = 1.0f;
  return a;
}

namespace {

ArrayF as_row(const ArrayF& x) { return x.reshaped({1, static_cast<int>(x.size())}); }

}  // namespace

ObserveOutput observe_step(const WorldModelParams& p, const ModelState& prev, const ArrayF& action, const ArrayF& obs,
                           Rng& rng, LatentSelect select) {
  if (static_cast<int>(obs.size()) != p.config.obs_dim())
    throw core::ShapeError("observe_step: observation " + core::shape_str(obs.shape()) + " does not match " +
                           core::shape_str(p.config.obs_shape));
  if (!obs.all_finite()) throw std::invalid_argument("observe_step: non-finite observation");
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  auto h = sequence_step(g, tape.constant(prev.h), tape.constant(prev.z), tape.constant(as_row(action)));
  auto post = posterior_dist(g, h, tape.constant(as_row(obs)));
  auto pri = prior_dist(g, h);
  ObserveOutput out;
  out.state.h = h.value();
  out.state.z = select == LatentSelect::Mode
                    ? core::categorical_mode(post)
                    : core::categorical_draw(core::categorical_probs(post.logits.value(), post.classes),
                                             post.classes, rng);
  out.prior_logits = pri.logits.value();
  out.posterior_logits = post.logits.value();
  return out;
}

ArrayF posterior_logits(const WorldModelParams& p, const ArrayF& h, const ArrayF& obs) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  return posterior_dist(g, tape.constant(h), tape.constant(as_row(obs))).logits.value();
}

ModelState imagine_step(const WorldModelParams& p, const ModelState& state, const ArrayF& action, Rng& rng) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  auto h = sequence_step(g, tape.constant(state.h), tape.constant(state.z), tape.constant(action));
  auto pri = prior_dist(g, h);
  return {h.value(), core::categorical_draw(core::categorical_probs(pri.logits.value(), pri.classes), pri.classes, rng)};
}

ArrayF decode(const WorldModelParams& p, const ModelState& state) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  auto x = decoder_mean(g, tape.constant(state.h), tape.constant(state.z)).value();
  if (state.rows() == 1) return x.reshaped(p.config.obs_shape);
  return x;
}

double predict_reward(const WorldModelParams& p, const ModelState& state) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  return reward_mean(g, tape.constant(state.h), tape.constant(state.z)).item();
}

double predict_continue(const WorldModelParams& p, const ModelState& state) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  return core::sigmoid(continue_logit(g, tape.constant(state.h), tape.constant(state.z))).item();
}

std::vector<ArrayF> ensemble_predict(const WorldModelParams& p, const ArrayF& h) {
  Tape<float> tape;
  auto g = bind_world_model(tape, p, false);
  auto hv = tape.constant(h);
  std::vector<ArrayF> out;
  for (int k = 0; k < p.config.ensemble; ++k) out.push_back(ensemble_member_probs(g, k, hv).value());
  return out;
}

}  // namespace dtii::model
