#include "dtii/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dtii::train {

using core::Rng;
using core::Tape;
using model::ModelState;

void TrainConfig::validate() const {
  if (batch < 1 || seq_len < 1 || ensemble_batch < 1 || imag_horizon < 1 || imag_starts < 1)
    throw std::invalid_argument("train config: sizes must be positive");
  if (wm_lr <= 0 || actor_lr <= 0 || critic_lr <= 0) throw std::invalid_argument("train config: learning rates must be positive");
  if (kl_scale <= 0) throw std::invalid_argument("train config: kl scale must be positive");
  if (free_bits < 0) throw std::invalid_argument("train config: free bits must be non-negative");
  if (kl_balance < 0 || kl_balance > 1) throw std::invalid_argument("train config: kl balance must lie in [0, 1]");
  if (gamma <= 0 || gamma > 1 || lambda < 0 || lambda > 1) throw std::invalid_argument("train config: bad discount");
  if (pool_capacity < 1) throw std::invalid_argument("train config: pool capacity must be positive");
}

namespace {

/// Scale gradients down to a global norm of at most `clip`. Returns false if any entry is non-finite.
bool clip_global(std::vector<ArrayF>& grads, double clip) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (float v : g.vec()) sq += static_cast<double>(v) * v;
  if (!std::isfinite(sq)) return false;
  const double norm = std::sqrt(sq);
  if (clip > 0 && norm > clip) {
    const float f = static_cast<float>(clip / norm);
    for (auto& g : grads)
      for (auto& v : g.vec()) v *= f;
  }
  return true;
}

void apply_adam(core::ParamSet& set, const std::vector<std::size_t>& idx, const std::vector<ArrayF>& all_grads,
                core::AdamState& state, double lr, double clip) {
  std::vector<ArrayF*> ptrs;
  std::vector<ArrayF> grads;
  for (std::size_t i : idx) {
    ptrs.push_back(&set.arrays[i]);
    grads.push_back(all_grads[i]);
  }
  if (!clip_global(grads, clip)) {
    spdlog::warn("non-finite gradient, update skipped");
    return;
  }
  std::vector<const ArrayF*> gptrs;
  for (const auto& g : grads) gptrs.push_back(&g);
  if (state.m.size() != ptrs.size()) state.init_like(ptrs);
  core::AdamConfig cfg;
  cfg.lr = lr;
  const auto skipped = core::adam_update(ptrs, gptrs, state, cfg);
  for (std::size_t s : skipped) spdlog::warn("adam skipped parameter {}", set.names[idx[s]]);
}

ArrayF stack_rows(const std::vector<ArrayF>& blocks) {
  int rows = 0;
  const int cols = blocks.front().cols();
  for (const auto& b : blocks) rows += b.rows();
  ArrayF out({rows, cols});
  std::size_t at = 0;
  for (const auto& b : blocks) {
    std::copy(b.data(), b.data() + b.size(), out.data() + at);
    at += b.size();
  }
  return out;
}

ArrayF pick_rows(const ArrayF& src, const std::vector<int>& rows) {
  const int cols = src.cols();
  ArrayF out({static_cast<int>(rows.size()), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(src.data() + static_cast<std::size_t>(rows[i]) * cols,
              src.data() + static_cast<std::size_t>(rows[i] + 1) * cols, out.data() + i * cols);
  return out;
}

std::uint64_t hash_indices(const std::vector<int>& idx) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int i : idx) {
    h ^= static_cast<std::uint64_t>(i) + 0x9E3779B97F4A7C15ULL;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ElboOutput elbo_loss(Tape<float>& tape, const model::WorldModelGraph<float>& g, const Batch& batch,
                     const TrainConfig& cfg, Rng& rng) {
  const auto& mc = g.cfg;
  ElboOutput out;
  auto h = tape.constant(ArrayF({batch.batch, mc.deter}, 0.0f));
  auto z = tape.constant(ArrayF({batch.batch, mc.latent_dim()}, 0.0f));
  std::vector<Var<float>> terms;
  const float inv = 1.0f / static_cast<float>(batch.batch * batch.length);
  const float bal = static_cast<float>(cfg.kl_balance);
  double recon = 0, kl = 0, kl_raw = 0, rew = 0, cont = 0;
  for (int t = 0; t < batch.length; ++t) {
    auto x = tape.constant(batch.obs[t]);
    h = model::sequence_step(g, h, z, tape.constant(batch.actions[t]));
    auto post = model::posterior_dist(g, h, x);
    auto prior = model::prior_dist(g, h);
    z = core::categorical_sample_st(post, rng);

    auto logits = model::decoder_logits(g, h, z);
    auto nll = core::sum(core::sub(core::softplus(logits), core::mul(x, logits)));

    core::CategoricalDist<float> post_sg(core::stop_gradient(post.logits), mc.classes);
    core::CategoricalDist<float> prior_sg(core::stop_gradient(prior.logits), mc.classes);
    auto dyn = core::kl_categorical_groups(post_sg, prior);
    auto rep = core::kl_categorical_groups(post, prior_sg);
    auto mixed = core::add(core::scale(dyn, bal), core::scale(rep, 1.0f - bal));
    auto klc = core::sum(core::clamp_min(mixed, static_cast<float>(cfg.free_bits)));

    auto r = tape.constant(batch.rewards[t]);
    auto rerr = core::scale(core::sum(core::square(core::sub(model::reward_mean(g, h, z), r))), 0.5f);
    auto c = tape.constant(batch.conts[t]);
    auto cl = model::continue_logit(g, h, z);
    auto cerr = core::sum(core::sub(core::softplus(cl), core::mul(c, cl)));

    terms.push_back(nll);
    terms.push_back(core::scale(klc, static_cast<float>(cfg.kl_scale)));
    terms.push_back(rerr);
    terms.push_back(cerr);
    recon += nll.item();
    kl += klc.item();
    kl_raw += core::sum_wide(dyn.value().span());
    rew += rerr.item();
    cont += cerr.item();
    out.h.push_back(h.value());
    out.z.push_back(z.value());
  }
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = core::add(total, terms[i]);
  out.loss = core::scale(total, inv);
  out.parts = {out.loss.item(), recon * inv, kl * inv, kl_raw * inv, rew * inv, cont * inv};
  return out;
}

void LatentPool::push(const ArrayF& hb, const ArrayF& zb) {
  for (int r = 0; r < hb.rows(); ++r) {
    ArrayF hr({1, hb.cols()}), zr({1, zb.cols()});
    std::copy(hb.data() + static_cast<std::size_t>(r) * hb.cols(), hb.data() + static_cast<std::size_t>(r + 1) * hb.cols(),
              hr.data());
    std::copy(zb.data() + static_cast<std::size_t>(r) * zb.cols(), zb.data() + static_cast<std::size_t>(r + 1) * zb.cols(),
              zr.data());
    if (h.size() < capacity) {
      h.push_back(std::move(hr));
      z.push_back(std::move(zr));
    } else {
      h[next] = std::move(hr);
      z[next] = std::move(zr);
    }
    next = (next + 1) % capacity;
  }
}

WorldModelTrainer::WorldModelTrainer(WorldModelParams& params, TrainConfig cfg, std::uint64_t seed)
    : params_(params), cfg_(cfg), rng_(seed) {
  cfg_.validate();
  pool_.capacity = cfg_.pool_capacity;
  members_.resize(params_.config.ensemble);
  order_hash_.assign(params_.config.ensemble, 0);
  reseed(seed);
}

void WorldModelTrainer::reseed(std::uint64_t seed) {
  rng_ = Rng(Rng::derive(seed, 1));
  reseed_members(Rng::derive(seed, 2));
}

void WorldModelTrainer::reseed_members(std::uint64_t seed) {
  member_rng_.clear();
  for (int k = 0; k < params_.config.ensemble; ++k) member_rng_.emplace_back(Rng::derive(seed, 100 + k));
}

WorldModelStep WorldModelTrainer::step(const ReplayBuffer& buffer) {
  WorldModelStep res;
  const auto batch = buffer.sample(cfg_.batch, cfg_.seq_len, params_.config.actions, rng_);
  {
    Tape<float> tape;
    auto g = model::bind_world_model(tape, params_, true);
    auto elbo = elbo_loss(tape, g, batch, cfg_, rng_);
    res.loss = elbo.parts;
    if (!std::isfinite(elbo.parts.total)) {
      spdlog::warn("non-finite world-model loss at step {}, batch skipped", main_.step);
      res.skipped = true;
      return res;
    }
    tape.backward(elbo.loss);
    const auto grads = core::collect_grads(tape, g.vars);
    apply_adam(params_.set, params_.main_indices(), grads, main_, cfg_.wm_lr, cfg_.grad_clip);
    for (std::size_t t = 0; t < elbo.h.size(); ++t) pool_.push(elbo.h[t], elbo.z[t]);
    last_post_ = {stack_rows(elbo.h), stack_rows(elbo.z)};
  }

  // Ensemble: each member fits the posterior latents on its own minibatch order.
  Tape<float> tape;
  auto g = model::bind_world_model(tape, params_, true);
  const int n = cfg_.ensemble_batch;
  std::vector<Var<float>> losses;
  for (int k = 0; k < params_.config.ensemble; ++k) {
    std::vector<int> idx(n);
    for (auto& i : idx) i = member_rng_[k].below(static_cast<int>(pool_.size()));
    order_hash_[k] = hash_indices(idx);
    std::vector<ArrayF> hs, zs;
    for (int i : idx) {
      hs.push_back(pool_.h[i]);
      zs.push_back(pool_.z[i]);
    }
    auto probs = model::ensemble_member_probs(g, k, tape.constant(stack_rows(hs)));
    auto logp = core::log(core::clamp_min(probs, static_cast<float>(core::kProbFloor)));
    losses.push_back(core::scale(core::sum(core::mul(tape.constant(stack_rows(zs)), logp)), -1.0f / n));
  }
  auto total = losses.front();
  for (std::size_t k = 1; k < losses.size(); ++k) total = core::add(total, losses[k]);
  res.ensemble_loss = total.item() / params_.config.ensemble;
  tape.backward(total);
  const auto grads = core::collect_grads(tape, g.vars);
  const auto ens = params_.ensemble_indices();
  const std::size_t per = ens.size() / params_.config.ensemble;
  for (int k = 0; k < params_.config.ensemble; ++k) {
    std::vector<std::size_t> mine(ens.begin() + k * per, ens.begin() + (k + 1) * per);
    apply_adam(params_.set, mine, grads, members_[k], cfg_.wm_lr, cfg_.grad_clip);
  }
  return res;
}

std::vector<double> train_world_model(WorldModelParams& params, const ReplayBuffer& buffer, const TrainConfig& cfg,
                                      int steps, std::uint64_t seed) {
  std::vector<double> trace;
  if (steps <= 0) return trace;
  WorldModelTrainer trainer(params, cfg, seed);
  for (int i = 0; i < steps; ++i) trace.push_back(trainer.step(buffer).loss.total);
  return trace;
}

std::vector<std::vector<double>> lambda_returns(const std::vector<std::vector<double>>& rewards,
                                                const std::vector<std::vector<double>>& conts,
                                                const std::vector<std::vector<double>>& values, double gamma,
                                                double lambda) {
  const std::size_t horizon = values.size() - 1;
  std::vector<std::vector<double>> ret(horizon + 1, std::vector<double>(values.front().size()));
  ret[horizon] = values[horizon];
  for (std::size_t j = horizon; j-- > 0;)
    for (std::size_t r = 0; r < ret[j].size(); ++r)
      ret[j][r] = rewards[j + 1][r] +
                  gamma * conts[j + 1][r] * ((1.0 - lambda) * values[j + 1][r] + lambda * ret[j + 1][r]);
  return ret;
}

ActorCriticTrainer::ActorCriticTrainer(ActorCriticParams& params, TrainConfig cfg, std::uint64_t seed)
    : params_(params), cfg_(cfg), rng_(seed) {
  cfg_.validate();
}

ActorCriticStep ActorCriticTrainer::step(const WorldModelParams& wm, const ModelState& starts) {
  ActorCriticStep res;
  const int rows = std::min(cfg_.imag_starts, starts.rows());
  std::vector<int> pick(rows);
  for (auto& r : pick) r = rng_.below(starts.rows());
  const int hor = cfg_.imag_horizon;
  const int na = params_.actions;

  // Imagine with frozen world model and actor.
  std::vector<ArrayF> hs, zs, acts;
  std::vector<std::vector<double>> rewards(hor + 1, std::vector<double>(rows, 0.0));
  std::vector<std::vector<double>> conts(hor + 1, std::vector<double>(rows, 1.0));
  std::vector<std::vector<double>> values(hor + 1, std::vector<double>(rows, 0.0));
  {
    Tape<float> tape;
    auto g = model::bind_world_model(tape, wm, false);
    auto ac = bind_actor_critic(tape, params_, false);
    const std::size_t mark = tape.size();
    ArrayF h = pick_rows(starts.h, pick), z = pick_rows(starts.z, pick);
    for (int j = 0; j <= hor; ++j) {
      tape.truncate(mark);
      auto hv = tape.constant(h), zv = tape.constant(z);
      const auto v = critic_value(ac, hv, zv).value();
      for (int r = 0; r < rows; ++r) values[j][r] = v[r];
      hs.push_back(h);
      zs.push_back(z);
      if (j == hor) break;
      const auto probs = core::categorical_probs(actor_logits(ac, hv, zv).value(), na);
      auto a = core::categorical_draw(probs, na, rng_);
      acts.push_back(a);
      auto hn = model::sequence_step(g, hv, zv, tape.constant(a));
      auto prior = model::prior_dist(g, hn);
      auto zn = tape.constant(
          core::categorical_draw(core::categorical_probs(prior.logits.value(), prior.classes), prior.classes, rng_));
      const auto rv = model::reward_mean(g, hn, zn).value();
      const auto cv = core::sigmoid(model::continue_logit(g, hn, zn)).value();
      for (int r = 0; r < rows; ++r) {
        rewards[j + 1][r] = rv[r];
        conts[j + 1][r] = cv[r];
      }
      h = hn.value();
      z = zn.value();
    }
  }

  const auto ret = lambda_returns(rewards, conts, values, cfg_.gamma, cfg_.lambda);
  std::vector<double> flat;
  for (int j = 0; j < hor; ++j) flat.insert(flat.end(), ret[j].begin(), ret[j].end());
  for (double v : flat)
    if (!std::isfinite(v)) {
      spdlog::warn("non-finite imagined return, actor-critic step skipped");
      res.skipped = true;
      return res;
    }
  std::vector<double> sorted = flat;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted[static_cast<std::size_t>(0.05 * (sorted.size() - 1))];
  const double hi = sorted[static_cast<std::size_t>(0.95 * (sorted.size() - 1))];
  const double norm = std::max(1.0, hi - lo);

  // Weights discount rollouts past predicted termination.
  const int n = hor * rows;
  ArrayF pg({n, na}, 0.0f), ent_w({n, na}, 0.0f), crit_w({n, 1}, 0.0f), target({n, 1}, 0.0f);
  std::vector<double> weight(rows, 1.0);
  double mean_ret = 0;
  for (int j = 0; j < hor; ++j) {
    for (int r = 0; r < rows; ++r) {
      const int i = j * rows + r;
      const double adv = (ret[j][r] - values[j][r]) / norm;
      for (int a = 0; a < na; ++a) {
        pg.at(i, a) = static_cast<float>(-weight[r] * adv * acts[j].at(r, a) / n);
        ent_w.at(i, a) = static_cast<float>(weight[r] * cfg_.actor_entropy / n);
      }
      crit_w[i] = static_cast<float>(weight[r] / n);
      target[i] = static_cast<float>(ret[j][r]);
      mean_ret += ret[j][r] / n;
    }
    for (int r = 0; r < rows; ++r) weight[r] *= cfg_.gamma * conts[j + 1][r];
  }
  res.mean_return = mean_ret;

  Tape<float> tape;
  auto ac = bind_actor_critic(tape, params_, true);
  auto hv = tape.constant(stack_rows({hs.begin(), hs.begin() + hor}));
  auto zv = tape.constant(stack_rows({zs.begin(), zs.begin() + hor}));
  auto logp = core::log_softmax_groups(actor_logits(ac, hv, zv), na);
  auto p = core::exp(logp);
  // Minimizing sum(p log p) * w maximizes the entropy bonus.
  auto actor_loss = core::add(core::sum(core::mul(logp, tape.constant(pg))),
                              core::sum(core::mul(core::mul(p, logp), tape.constant(ent_w))));
  auto v = critic_value(ac, hv, zv);
  auto critic_loss =
      core::scale(core::sum(core::mul(core::square(core::sub(v, tape.constant(target))), tape.constant(crit_w))), 0.5f);
  auto total = core::add(actor_loss, critic_loss);
  res.actor_loss = actor_loss.item();
  res.critic_loss = critic_loss.item();
  double ent = 0;
  for (std::size_t i = 0; i < p.value().size(); ++i) ent -= p.value()[i] * logp.value()[i];
  res.entropy = ent / n;
  if (!std::isfinite(total.item())) {
    res.skipped = true;
    return res;
  }
  tape.backward(total);
  const auto grads = core::collect_grads(tape, ac.vars);
  apply_adam(params_.set, params_.actor_indices(), grads, actor_, cfg_.actor_lr, cfg_.grad_clip);
  apply_adam(params_.set, params_.critic_indices(), grads, critic_, cfg_.critic_lr, cfg_.grad_clip);
  return res;
}

Collector::Collector(std::unique_ptr<env::Environment> env) : env_(std::move(env)) {}

void Collector::collect(const WorldModelParams& wm, const ActorCriticParams& ac, ReplayBuffer& buffer, int steps,
                        Rng& rng, double epsilon) {
  const int na = env_->action_count();
  for (int s = 0; s < steps; ++s) {
    if (!active_) {
      obs_ = env_->reset(rng.next());
      current_ = Episode{};
      current_.push(obs_.reshaped({static_cast<int>(obs_.size())}), -1, 0.0f, 1.0f);
      state_ = model::observe_step(wm, model::initial_state(wm.config), model::action_onehot(-1, na), obs_, rng,
                                   model::LatentSelect::Sample)
                   .state;
      active_ = true;
    }
    const int a = rng.uniform() < epsilon ? rng.below(na) : actor_sample(ac, state_, rng);
    auto res = env_->step(a);
    obs_ = std::move(res.observation);
    current_.push(obs_.reshaped({static_cast<int>(obs_.size())}), a, static_cast<float>(res.reward),
                  static_cast<float>(res.cont));
    if (env_->done()) {
      buffer.add(std::move(current_));
      ++finished_;
      active_ = false;
    } else {
      state_ = model::observe_step(wm, state_, model::action_onehot(a, na), obs_, rng, model::LatentSelect::Sample)
                   .state;
    }
  }
}

}  // namespace dtii::train
