#pragma once

#include "dtii/model/world_model.hpp"

namespace dtii::train {

using core::ArrayF;
using core::Var;
using model::ModelState;
using model::WorldModelConfig;

/// Policy and value heads on the model state (h, z).
struct ActorCriticParams {
  int feature_dim = 0;
  int actions = 0;
  int units = 0;
  core::ParamSet set;

  /// Random hidden layers; the policy output layer starts at zero so the
  /// untrained actor is uniform.
  static ActorCriticParams init(const WorldModelConfig& cfg, std::uint64_t seed, int units = 0);
  std::size_t parameter_count() const { return set.count(); }
  std::vector<std::size_t> actor_indices() const { return {0, 1, 2, 3}; }
  std::vector<std::size_t> critic_indices() const { return {4, 5, 6, 7}; }
};

template <class T>
struct ActorCriticGraph {
  model::Mlp<T> actor;
  model::Mlp<T> critic;
  std::vector<Var<T>> vars;
};

template <class T>
ActorCriticGraph<T> bind_actor_critic(core::Tape<T>& tape, const ActorCriticParams& p, bool requires_grad) {
  ActorCriticGraph<T> g;
  g.vars = core::bind_params(tape, p.set, requires_grad);
  std::size_t at = 0;
  g.actor = model::detail::take_mlp(g.vars, at);
  g.critic = model::detail::take_mlp(g.vars, at);
  return g;
}

template <class T>
Var<T> actor_logits(const ActorCriticGraph<T>& g, Var<T> h, Var<T> z) {
  return model::mlp_forward(g.actor, core::concat_cols<T>({h, z}));
}

template <class T>
Var<T> critic_value(const ActorCriticGraph<T>& g, Var<T> h, Var<T> z) {
  return model::mlp_forward(g.critic, core::concat_cols<T>({h, z}));
}

ArrayF policy_logits(const ActorCriticParams& p, const ModelState& s);
/// Greedy action, ties to the lowest index.
int actor_mode(const ActorCriticParams& p, const ModelState& s);
int actor_sample(const ActorCriticParams& p, const ModelState& s, core::Rng& rng);
double critic_estimate(const ActorCriticParams& p, const ModelState& s);

}  // namespace dtii::train
