#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtii/core/distributions.hpp"
#include "dtii/core/params.hpp"

namespace dtii::model {

using core::ArrayF;
using core::CategoricalDist;
using core::Var;

struct WorldModelConfig {
  core::Shape obs_shape{5, 5, 6};
  int actions = 3;
  int deter = 128;   // H, width of the recurrent state
  int groups = 8;    // G
  int classes = 8;   // C
  int units = 128;   // hidden width of every perceptron head
  int ensemble = 8;  // K

  int obs_dim() const { return static_cast<int>(core::shape_numel(obs_shape)); }
  int latent_dim() const { return groups * classes; }
  int feature_dim() const { return deter + latent_dim(); }
  void validate() const;
  friend bool operator==(const WorldModelConfig&, const WorldModelConfig&) = default;
};

/// Recurrent state h and one-hot latent z, one row per batch entry.
struct ModelState {
  ArrayF h;
  ArrayF z;
  int rows() const { return h.rows(); }
  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct WorldModelParams {
  WorldModelConfig config;
  core::ParamSet set;

  /// Every array zero: uniform priors and posteriors, midpoint decoder.
  static WorldModelParams zeros(const WorldModelConfig& cfg);
  static WorldModelParams init(const WorldModelConfig& cfg, std::uint64_t seed);
  std::size_t parameter_count() const { return set.count(); }
  /// Indices of the arrays belonging to ensemble members; the rest are the main model.
  std::vector<std::size_t> ensemble_indices() const;
  std::vector<std::size_t> main_indices() const;
};

template <class T>
struct Mlp {
  std::vector<Var<T>> w;
  std::vector<Var<T>> b;
};

/// Two-layer perceptron: SiLU hidden layer, linear output.
template <class T>
Var<T> mlp_forward(const Mlp<T>& m, Var<T> x) {
  for (std::size_t l = 0; l < m.w.size(); ++l) {
    x = core::affine(x, m.w[l], m.b[l]);
    if (l + 1 < m.w.size()) x = core::silu(x);
  }
  return x;
}

/// Parameters of one world model placed on a tape.
template <class T>
struct WorldModelGraph {
  WorldModelConfig cfg;
  std::vector<Var<T>> vars;
  core::GruParams<T> seq;
  Mlp<T> enc, prior, reward, cont, dec;
  std::vector<Mlp<T>> ens;
};

namespace detail {
template <class T>
Mlp<T> take_mlp(const std::vector<Var<T>>& v, std::size_t& at) {
  Mlp<T> m;
  for (int l = 0; l < 2; ++l) {
    m.w.push_back(v[at++]);
    m.b.push_back(v[at++]);
  }
  return m;
}
}  // namespace detail

template <class T>
WorldModelGraph<T> bind_world_model(core::Tape<T>& tape, const WorldModelParams& p, bool requires_grad) {
  WorldModelGraph<T> g;
  g.cfg = p.config;
  g.vars = core::bind_params(tape, p.set, requires_grad);
  std::size_t at = 0;
  g.seq = {g.vars[0], g.vars[1], g.vars[2], g.vars[3]};
  at = 4;
  g.enc = detail::take_mlp(g.vars, at);
  g.prior = detail::take_mlp(g.vars, at);
  g.reward = detail::take_mlp(g.vars, at);
  g.cont = detail::take_mlp(g.vars, at);
  g.dec = detail::take_mlp(g.vars, at);
  for (int k = 0; k < p.config.ensemble; ++k) g.ens.push_back(detail::take_mlp(g.vars, at));
  return g;
}

template <class T>
Var<T> sequence_step(const WorldModelGraph<T>& g, Var<T> h, Var<T> z, Var<T> action) {
  return core::gated_recurrent_cell(h, core::concat_cols<T>({z, action}), g.seq);
}

template <class T>
CategoricalDist<T> posterior_dist(const WorldModelGraph<T>& g, Var<T> h, Var<T> obs) {
  return {mlp_forward(g.enc, core::concat_cols<T>({h, obs})), g.cfg.classes};
}

template <class T>
CategoricalDist<T> prior_dist(const WorldModelGraph<T>& g, Var<T> h) {
  return {mlp_forward(g.prior, h), g.cfg.classes};
}

template <class T>
Var<T> decoder_logits(const WorldModelGraph<T>& g, Var<T> h, Var<T> z) {
  return mlp_forward(g.dec, core::concat_cols<T>({h, z}));
}

/// Reconstruction in [0, 1], one row per state.
template <class T>
Var<T> decoder_mean(const WorldModelGraph<T>& g, Var<T> h, Var<T> z) {
  return core::sigmoid(decoder_logits(g, h, z));
}

template <class T>
Var<T> reward_mean(const WorldModelGraph<T>& g, Var<T> h, Var<T> z) {
  return mlp_forward(g.reward, core::concat_cols<T>({h, z}));
}

template <class T>
Var<T> continue_logit(const WorldModelGraph<T>& g, Var<T> h, Var<T> z) {
  return mlp_forward(g.cont, core::concat_cols<T>({h, z}));
}

/// Member k's predicted latent probabilities at h, [rows, G*C].
template <class T>
Var<T> ensemble_member_probs(const WorldModelGraph<T>& g, int k, Var<T> h) {
  return core::softmax_groups(mlp_forward(g.ens[k], h), g.cfg.classes);
}

// Array-level interface for evaluation and data collection.

enum class LatentSelect { Sample, Mode };

struct ObserveOutput {
  ModelState state;
  ArrayF prior_logits;
  ArrayF posterior_logits;
};

ModelState initial_state(const WorldModelConfig& cfg, int rows = 1);

/// One-hot row for an action; a negative index gives the all-zero "no action" row.
ArrayF action_onehot(int action, int count);

ObserveOutput observe_step(const WorldModelParams& p, const ModelState& prev, const ArrayF& action,
                           const ArrayF& obs, core::Rng& rng, LatentSelect select);

/// Posterior logits for a given recurrent state and observation.
ArrayF posterior_logits(const WorldModelParams& p, const ArrayF& h, const ArrayF& obs);

ModelState imagine_step(const WorldModelParams& p, const ModelState& state, const ArrayF& action, core::Rng& rng);

/// Reconstruction for a single state, shaped like an observation.
ArrayF decode(const WorldModelParams& p, const ModelState& state);
double predict_reward(const WorldModelParams& p, const ModelState& state);
double predict_continue(const WorldModelParams& p, const ModelState& state);
std::vector<ArrayF> ensemble_predict(const WorldModelParams& p, const ArrayF& h);

}  // namespace dtii::model
