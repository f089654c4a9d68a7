#pragma once

#include <string>
#include <vector>

#include "dtii/train/actor_critic.hpp"

namespace dtii::ii {

using core::ArrayF;
using core::CategoricalDist;
using core::Var;
using model::ModelState;
using model::WorldModelGraph;
using model::WorldModelParams;
using train::ActorCriticGraph;
using train::ActorCriticParams;

enum class Objective { Sig, Pig, Ent, None };

Objective parse_objective(const std::string& name);
std::string objective_name(Objective o);

struct IIConfig {
  Objective objective = Objective::Sig;
  int iterations = 10;  // n
  int samples = 3;      // s
  int rollout = 1;      // lambda
  double alpha = 0.01;
  double reg_free_bits = 1.0;
  double reg_scale = 1.0;
  double obj_scale = 1.0;
  // Reuse the same rollout draws at every iteration instead of fresh ones.
  bool common_random_numbers = false;
  void validate() const;
  bool bypass() const { return objective == Objective::None; }
};

/// Imagined trajectory, one row per sample. Entry 0 is the start state.
template <class T>
struct Rollout {
  std::vector<Var<T>> h;
  std::vector<Var<T>> z;
  std::vector<Var<T>> actions;
  int length() const { return static_cast<int>(actions.size()); }
};

/// Alternate actor sampling, the recurrent model and prior sampling. Every
/// sample passes gradient straight through, so the chain stays differentiable
/// in the start state.
template <class T>
Rollout<T> rollout(const WorldModelGraph<T>& g, const ActorCriticGraph<T>& ac, Var<T> h0, Var<T> z0, int length,
                   core::Rng& rng) {
  Rollout<T> r;
  r.h.push_back(h0);
  r.z.push_back(z0);
  for (int j = 1; j <= length; ++j) {
    CategoricalDist<T> pi(train::actor_logits(ac, r.h.back(), r.z.back()), g.cfg.actions);
    auto a = core::categorical_sample_st(pi, rng);
    auto h = model::sequence_step(g, r.h.back(), r.z.back(), a);
    auto z = core::categorical_sample_st(model::prior_dist(g, h), rng);
    r.actions.push_back(a);
    r.h.push_back(h);
    r.z.push_back(z);
  }
  return r;
}

namespace detail {

template <class T>
T normaliser(int length, int rows) {
  return T{1} / static_cast<T>(std::max(length, 1) * rows);
}

template <class T>
Var<T> sum_terms(const std::vector<Var<T>>& terms) {
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = core::add(total, terms[i]);
  return total;
}

}  // namespace detail

/// KL between the posterior on the decoded observation and the prior at one state, per row summed.
template <class T>
Var<T> sig_step(const WorldModelGraph<T>& g, Var<T> h, Var<T> z) {
  auto xhat = model::decoder_mean(g, h, z);
  return core::kl_categorical(model::posterior_dist(g, h, xhat), model::prior_dist(g, h));
}

/// Across-member variance of the ensemble predictions, averaged over components, summed over rows.
template <class T>
Var<T> ensemble_variance(const std::vector<Var<T>>& members) {
  const T inv_k = T{1} / static_cast<T>(members.size());
  // Deviations from member 0 keep identical members at exactly zero.
  std::vector<Var<T>> shifted;
  for (const auto& m : members) shifted.push_back(core::sub(m, members.front()));
  auto mean = core::scale(detail::sum_terms(shifted), inv_k);
  std::vector<Var<T>> dev;
  for (const auto& d : shifted) dev.push_back(core::square(core::sub(d, mean)));
  const T inv_c = T{1} / static_cast<T>(members.front().cols());
  return core::scale(core::sum(detail::sum_terms(dev)), inv_k * inv_c);
}

template <class T>
Var<T> pig_step(const WorldModelGraph<T>& g, Var<T> h) {
  std::vector<Var<T>> members;
  for (int k = 0; k < g.cfg.ensemble; ++k) members.push_back(model::ensemble_member_probs(g, k, h));
  return ensemble_variance(members);
}

template <class T>
Var<T> ent_step(const WorldModelGraph<T>& g, Var<T> h) {
  return core::entropy_categorical(model::prior_dist(g, h));
}

/// (1/lambda) sum_{j=0..lambda} of the per-state term, averaged over rollout rows.
template <class T>
Var<T> obj_sig(const WorldModelGraph<T>& g, const Rollout<T>& r) {
  std::vector<Var<T>> terms;
  for (std::size_t j = 0; j < r.h.size(); ++j) terms.push_back(sig_step(g, r.h[j], r.z[j]));
  return core::scale(detail::sum_terms(terms), detail::normaliser<T>(r.length(), r.h[0].rows()));
}

template <class T>
Var<T> obj_pig(const WorldModelGraph<T>& g, const Rollout<T>& r) {
  std::vector<Var<T>> terms;
  for (const auto& h : r.h) terms.push_back(pig_step(g, h));
  return core::scale(detail::sum_terms(terms), detail::normaliser<T>(r.length(), r.h[0].rows()));
}

template <class T>
Var<T> obj_ent(const WorldModelGraph<T>& g, const Rollout<T>& r) {
  std::vector<Var<T>> terms;
  for (const auto& h : r.h) terms.push_back(ent_step(g, h));
  return core::scale(detail::sum_terms(terms), detail::normaliser<T>(r.length(), r.h[0].rows()));
}

template <class T>
Var<T> objective_value(Objective o, const WorldModelGraph<T>& g, const Rollout<T>& r) {
  switch (o) {
    case Objective::Sig: return obj_sig(g, r);
    case Objective::Pig: return obj_pig(g, r);
    case Objective::Ent: return obj_ent(g, r);
    case Objective::None: break;
  }
  throw std::invalid_argument("objective NONE has no value");
}

/// max(free_bits, KL(q0 || qi)); no gradient while the divergence is under the floor.
template <class T>
Var<T> reg_term(const CategoricalDist<T>& q0, const CategoricalDist<T>& qi, double free_bits) {
  return core::clamp_min(core::kl_categorical(q0, qi), static_cast<T>(free_bits));
}

struct IterationRecord {
  double objective = 0;
  double regularizer = 0;
  double grad_norm = 0;  // zero on the last entry, which takes no step
};

struct RefinementTrace {
  std::vector<IterationRecord> iterations;
  bool nonfinite = false;
};

struct RefineResult {
  ModelState state;
  int action = 0;
  RefinementTrace trace;
};

/// Decision-time refinement of h for the current observation `obs`.
RefineResult refine(const WorldModelParams& wm, const ActorCriticParams& ac, const ArrayF& h0, const ArrayF& obs,
                    const IIConfig& cfg, core::Rng& rng);

/// One s-sample estimate of the configured objective at (h, mode of q(z|h, obs)).
double objective_estimate(const WorldModelParams& wm, const ActorCriticParams& ac, const ArrayF& h,
                          const ArrayF& obs, const IIConfig& cfg, core::Rng& rng);

}  // namespace dtii::ii
