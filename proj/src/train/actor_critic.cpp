#include "dtii/train/actor_critic.hpp"

namespace dtii::train {

ActorCriticParams ActorCriticParams::init(const WorldModelConfig& cfg, std::uint64_t seed, int units) {
  ActorCriticParams p;
  p.feature_dim = cfg.feature_dim();
  p.actions = cfg.actions;
  p.units = units > 0 ? units : cfg.units;
  core::Rng rng(seed);
  p.set.add("actor.w0", core::scaled_normal(p.feature_dim, p.units, rng));
  p.set.add("actor.b0", ArrayF({p.units}, 0.0f));
  p.set.add("actor.w1", ArrayF({p.units, p.actions}, 0.0f));
  p.set.add("actor.b1", ArrayF({p.actions}, 0.0f));
  p.set.add("critic.w0", core::scaled_normal(p.feature_dim, p.units, rng));
  p.set.add("critic.b0", ArrayF({p.units}, 0.0f));
  p.set.add("critic.w1", ArrayF({p.units, 1}, 0.0f));
  p.set.add("critic.b1", ArrayF({1}, 0.0f));
  return p;
}

ArrayF policy_logits(const ActorCriticParams& p, const ModelState& s) {
  core::Tape<float> tape;
  auto g = bind_actor_critic(tape, p, false);
  return actor_logits(g, tape.constant(s.h), tape.constant(s.z)).value();
}

int actor_mode(const ActorCriticParams& p, const ModelState& s) {
  const auto mode = core::categorical_mode(policy_logits(p, s), p.actions);
  for (int a = 0; a < p.actions; ++a)
    if (mode[a] > 0.5f) return a;
  return 0;
}

int actor_sample(const ActorCriticParams& p, const ModelState& s, core::Rng& rng) {
  const auto draw =
      core::categorical_draw(core::categorical_probs(policy_logits(p, s), p.actions), p.actions, rng);
  for (int a = 0; a < p.actions; ++a)
    if (draw[a] > 0.5f) return a;
  return 0;
}

double critic_estimate(const ActorCriticParams& p, const ModelState& s) {
  core::Tape<float> tape;
  auto g = bind_actor_critic(tape, p, false);
  return critic_value(g, tape.constant(s.h), tape.constant(s.z)).item();
}

}  // namespace dtii::train
