#include "dtii/ii/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtii::ii {

Objective parse_objective(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "SIG") return Objective::Sig;
  if (s == "PIG") return Objective::Pig;
  if (s == "ENT") return Objective::Ent;
  if (s == "NONE") return Objective::None;
  throw std::invalid_argument("unknown objective '" + name + "' (expected SIG, PIG, ENT or NONE)");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::Sig: return "SIG";
    case Objective::Pig: return "PIG";
    case Objective::Ent: return "ENT";
    case Objective::None: return "NONE";
  }
  return "?";
}

void IIConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (rollout < 0) throw std::invalid_argument("rollout length must be >= 0");
  if (!std::isfinite(alpha) || alpha < 0) throw std::invalid_argument("alpha must be finite and >= 0");
  if (!std::isfinite(reg_free_bits) || reg_free_bits < 0) throw std::invalid_argument("reg_free_bits must be >= 0");
  if (!std::isfinite(reg_scale) || !std::isfinite(obj_scale)) throw std::invalid_argument("scales must be finite");
}

namespace {

struct Bound {
  core::Tape<float> tape;
  WorldModelGraph<float> wm;
  ActorCriticGraph<float> ac;
  Var<float> obs;
  std::size_t mark = 0;

  Bound(const WorldModelParams& w, const ActorCriticParams& a, const ArrayF& x)
      : wm(model::bind_world_model(tape, w, false)), ac(train::bind_actor_critic(tape, a, false)) {
    obs = tape.constant(x.reshaped({1, w.config.obs_dim()}));
    mark = tape.size();
  }
};

void check_inputs(const WorldModelParams& wm, const ArrayF& h, const ArrayF& obs) {
  if (h.size() != static_cast<std::size_t>(wm.config.deter))
    throw core::ShapeError("refine: h must hold one state of size " + std::to_string(wm.config.deter));
  if (obs.size() != static_cast<std::size_t>(wm.config.obs_dim()))
    throw core::ShapeError("refine: observation size " + std::to_string(obs.size()) + " != " +
                           std::to_string(wm.config.obs_dim()));
}

ArrayF as_row(const ArrayF& a) {
  return a.reshaped({1, static_cast<int>(a.size())});
}

}  // namespace

RefineResult refine(const WorldModelParams& wm, const ActorCriticParams& ac, const ArrayF& h0, const ArrayF& obs,
                    const IIConfig& cfg, core::Rng& rng) {
  cfg.validate();
  check_inputs(wm, h0, obs);
  const auto& mc = wm.config;
  Bound b(wm, ac, obs);
  auto& tape = b.tape;

  const ArrayF q0_logits = model::posterior_dist(b.wm, tape.constant(as_row(h0)), b.obs).logits.value();
  const std::size_t mark = tape.size();

  RefineResult res;
  ArrayF h = as_row(h0);

  if (!cfg.bypass()) {
    const core::Rng start = rng;
    core::Rng fixed = start;
    for (int i = 0; i <= cfg.iterations; ++i) {
      tape.truncate(mark);
      if (cfg.common_random_numbers) fixed = start;
      core::Rng& draw = cfg.common_random_numbers ? fixed : rng;
      auto hv = tape.leaf(h, true);
      CategoricalDist<float> q0(tape.constant(q0_logits), mc.classes);
      auto qi = model::posterior_dist(b.wm, hv, b.obs);
      auto zi = core::categorical_mode_st(qi);
      auto r = rollout(b.wm, b.ac, core::repeat_rows(hv, cfg.samples), core::repeat_rows(zi, cfg.samples),
                       cfg.rollout, draw);
      auto obj = objective_value(cfg.objective, b.wm, r);
      auto reg = reg_term(q0, qi, cfg.reg_free_bits);
      auto loss = core::add(core::scale(obj, static_cast<float>(cfg.obj_scale)),
                            core::scale(reg, static_cast<float>(cfg.reg_scale)));

      IterationRecord rec{obj.item(), reg.item(), 0.0};
      if (!std::isfinite(rec.objective) || !std::isfinite(rec.regularizer)) {
        res.trace.nonfinite = true;
        res.trace.iterations.push_back(rec);
        break;
      }
      if (i == cfg.iterations) {
        res.trace.iterations.push_back(rec);
        break;
      }
      tape.backward(loss);
      const ArrayF& grad = hv.grad();
      double sq = 0;
      bool finite = true;
      if (grad.size() == h.size()) {
        for (std::size_t k = 0; k < grad.size(); ++k) {
          finite = finite && std::isfinite(grad[k]);
          sq += static_cast<double>(grad[k]) * grad[k];
        }
      }
      rec.grad_norm = std::sqrt(sq);
      res.trace.iterations.push_back(rec);
      if (!finite) {
        res.trace.nonfinite = true;
        break;
      }
      if (grad.size() == h.size())
        for (std::size_t k = 0; k < h.size(); ++k) h[k] -= static_cast<float>(cfg.alpha) * grad[k];
    }
    if (cfg.common_random_numbers) rng = fixed;
  } else {
    res.trace.iterations.push_back({});
  }

  tape.truncate(mark);
  auto hv = tape.constant(h);
  auto z = core::categorical_mode(model::posterior_dist(b.wm, hv, b.obs));
  res.state = ModelState{h, z};
  res.action = train::actor_mode(ac, res.state);
  return res;
}

double objective_estimate(const WorldModelParams& wm, const ActorCriticParams& ac, const ArrayF& h,
                          const ArrayF& obs, const IIConfig& cfg, core::Rng& rng) {
  cfg.validate();
  check_inputs(wm, h, obs);
  if (cfg.bypass()) return 0.0;
  Bound b(wm, ac, obs);
  auto hv = b.tape.constant(as_row(h));
  auto z = core::categorical_mode_st(model::posterior_dist(b.wm, hv, b.obs));
  auto r = rollout(b.wm, b.ac, core::repeat_rows(hv, cfg.samples), core::repeat_rows(z, cfg.samples), cfg.rollout,
                   rng);
  return objective_value(cfg.objective, b.wm, r).item();
}

}  // namespace dtii::ii
