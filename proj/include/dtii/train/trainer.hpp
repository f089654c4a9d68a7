#pragma once

#include <memory>
#include <vector>

#include "dtii/core/adam.hpp"
#include "dtii/env/environment.hpp"
#include "dtii/train/actor_critic.hpp"
#include "dtii/train/replay.hpp"

namespace dtii::train {

using model::WorldModelParams;

struct TrainConfig {
  int batch = 16;
  int seq_len = 16;
  double wm_lr = 1e-3;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double kl_scale = 1.0;    // beta
  double free_bits = 1.0;   // nats per latent group
  double kl_balance = 0.8;  // share of the KL gradient that moves the prior
  int ensemble_batch = 64;
  std::size_t pool_capacity = 20000;
  int imag_horizon = 15;
  int imag_starts = 64;
  double gamma = 0.97;
  double lambda = 0.95;
  double actor_entropy = 3e-3;
  double grad_clip = 100.0;
  void validate() const;
};

struct LossParts {
  double total = 0;
  double recon = 0;    // negative log-likelihood of observations, per step
  double kl = 0;       // clamped, balanced KL per step
  double kl_raw = 0;   // unclamped KL(q || p) per step
  double reward = 0;
  double cont = 0;
};

/// Negative ELBO with reward and continue prediction terms for one batch.
struct ElboOutput {
  Var<float> loss;
  LossParts parts;
  std::vector<ArrayF> h;  // detached posterior states per time step, [B, H]
  std::vector<ArrayF> z;  // [B, G*C]
};

ElboOutput elbo_loss(core::Tape<float>& tape, const model::WorldModelGraph<float>& g, const Batch& batch,
                     const TrainConfig& cfg, core::Rng& rng);

struct WorldModelStep {
  LossParts loss;
  double ensemble_loss = 0;
  bool skipped = false;  // non-finite loss or gradient
};

/// Detached (h, z) pairs the ensemble learns from.
struct LatentPool {
  std::size_t capacity = 0;
  std::size_t next = 0;
  std::vector<ArrayF> h;  // rows [1, H]
  std::vector<ArrayF> z;

  void push(const ArrayF& hb, const ArrayF& zb);
  std::size_t size() const { return h.size(); }
  friend bool operator==(const LatentPool&, const LatentPool&) = default;
};

/// Owns the optimizer state for one world model. Ensemble members each draw
/// their own minibatch order from a private stream.
class WorldModelTrainer {
 public:
  WorldModelTrainer(WorldModelParams& params, TrainConfig cfg, std::uint64_t seed);

  WorldModelStep step(const ReplayBuffer& buffer);

  /// Posterior states from the most recent batch, flattened to rows.
  const model::ModelState& last_posteriors() const { return last_post_; }

  /// Hash of the minibatch indices member k drew on its most recent update.
  std::uint64_t member_order_hash(int k) const { return order_hash_[k]; }

  void reseed(std::uint64_t seed);
  /// Replace only the ensemble minibatch streams.
  void reseed_members(std::uint64_t seed);
  core::AdamState& main_state() { return main_; }
  const core::AdamState& main_state() const { return main_; }
  std::vector<core::AdamState>& member_states() { return members_; }
  const std::vector<core::AdamState>& member_states() const { return members_; }
  LatentPool& pool() { return pool_; }
  const LatentPool& pool() const { return pool_; }
  core::Rng& rng() { return rng_; }
  const core::Rng& rng() const { return rng_; }
  std::vector<core::Rng>& member_rngs() { return member_rng_; }
  const std::vector<core::Rng>& member_rngs() const { return member_rng_; }
  std::int64_t steps_done() const { return main_.step; }

 private:
  WorldModelParams& params_;
  TrainConfig cfg_;
  core::Rng rng_;
  std::vector<core::Rng> member_rng_;
  core::AdamState main_;
  std::vector<core::AdamState> members_;
  LatentPool pool_;
  model::ModelState last_post_;
  std::vector<std::uint64_t> order_hash_;
};

/// Convenience wrapper: `steps` updates, returns the total loss per step.
std::vector<double> train_world_model(WorldModelParams& params, const ReplayBuffer& buffer, const TrainConfig& cfg,
                                      int steps, std::uint64_t seed);

struct ActorCriticStep {
  double actor_loss = 0;
  double critic_loss = 0;
  double entropy = 0;
  double mean_return = 0;
  bool skipped = false;
};

class ActorCriticTrainer {
 public:
  ActorCriticTrainer(ActorCriticParams& params, TrainConfig cfg, std::uint64_t seed);

  /// One policy-gradient update on rollouts imagined from `starts`.
  ActorCriticStep step(const WorldModelParams& wm, const model::ModelState& starts);

  void reseed(std::uint64_t seed) { rng_ = core::Rng(seed); }
  core::Rng& rng() { return rng_; }
  const core::Rng& rng() const { return rng_; }
  core::AdamState& actor_state() { return actor_; }
  const core::AdamState& actor_state() const { return actor_; }
  core::AdamState& critic_state() { return critic_; }
  const core::AdamState& critic_state() const { return critic_; }

 private:
  ActorCriticParams& params_;
  TrainConfig cfg_;
  core::Rng rng_;
  core::AdamState actor_;
  core::AdamState critic_;
};

/// Lambda-returns: R_j = r_{j+1} + gamma c_{j+1} ((1 - lambda) V_{j+1} + lambda R_{j+1}), R_H = V_H.
/// `rewards`, `conts` and `values` are [H+1][rows]; entry 0 of rewards and conts is unused.
std::vector<std::vector<double>> lambda_returns(const std::vector<std::vector<double>>& rewards,
                                                const std::vector<std::vector<double>>& conts,
                                                const std::vector<std::vector<double>>& values, double gamma,
                                                double lambda);

/// Steps an environment with the current agent and hands finished episodes to
/// a replay buffer.
class Collector {
 public:
  explicit Collector(std::unique_ptr<env::Environment> env);

  /// Take exactly `steps` environment steps. With probability `epsilon` an
  /// action is uniform; otherwise it is sampled from the actor.
  void collect(const WorldModelParams& wm, const ActorCriticParams& ac, ReplayBuffer& buffer, int steps,
               core::Rng& rng, double epsilon);

  /// Drop the episode in progress; the next step starts a fresh one.
  void truncate() { active_ = false; }
  env::Environment& environment() { return *env_; }
  std::size_t episodes_finished() const { return finished_; }
  void set_episodes_finished(std::size_t n) { finished_ = n; }

 private:
  std::unique_ptr<env::Environment> env_;
  Episode current_;
  model::ModelState state_;
  core::ArrayF obs_;
  bool active_ = false;
  std::size_t finished_ = 0;
};

}  // namespace dtii::train
