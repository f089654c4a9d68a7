#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtii/io/checkpoint.hpp"
#include "dtii/train/trainer.hpp"

namespace dtii::train {

struct RunSchedule {
  std::int64_t wm_steps = 20000;    // budget in world-model updates
  int env_steps_per_update = 4;
  int prefill = 1000;               // random-policy steps before the first update
  int ac_every = 1;                 // actor-critic update every k world-model updates
  std::int64_t checkpoint_every = 5000;
  double epsilon = 0.05;            // uniform-action mixing while collecting
  void validate() const;
};

/// Interleaved collection and training for one agent. At every checkpoint
/// boundary the episode in progress is dropped, so a run resumed from saved
/// state continues exactly as the uninterrupted run does.
class TrainingRun {
 public:
  TrainingRun(const model::WorldModelConfig& model_cfg, const TrainConfig& train_cfg, const RunSchedule& schedule,
              env::Task task, const env::EnvOptions& env_options, std::uint64_t seed);
  TrainingRun(const TrainingRun&) = delete;
  TrainingRun& operator=(const TrainingRun&) = delete;

  /// One cycle: collect, one world-model update, maybe an actor-critic update.
  void step();
  std::int64_t steps() const { return steps_; }
  bool finished() const { return steps_ >= schedule_.wm_steps; }
  bool at_checkpoint() const;

  const std::vector<double>& loss_trace() const { return losses_; }
  const WorldModelStep& last_step() const { return last_; }
  const ActorCriticStep& last_ac_step() const { return last_ac_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  io::Checkpoint checkpoint() const { return {steps_, wm_, ac_}; }
  const WorldModelParams& world_model() const { return wm_; }
  const ActorCriticParams& actor_critic() const { return ac_; }

  /// Everything needed to continue: parameters, optimizer moments, generator
  /// streams, the latent pool and the replay buffer.
  std::string encode_state() const;
  void restore_state(const std::string& bytes);

 private:
  model::WorldModelConfig model_cfg_;
  TrainConfig train_cfg_;
  RunSchedule schedule_;
  WorldModelParams wm_;
  ActorCriticParams ac_;
  WorldModelTrainer wm_trainer_;
  ActorCriticTrainer ac_trainer_;
  ReplayBuffer buffer_;
  Collector collector_;
  core::Rng collect_rng_;
  std::int64_t steps_ = 0;
  std::vector<double> losses_;
  WorldModelStep last_;
  ActorCriticStep last_ac_;
};

}  // namespace dtii::train
