#pragma once

#include <deque>
#include <vector>

#include "dtii/core/array.hpp"
#include "dtii/core/rng.hpp"

namespace dtii::train {

using core::ArrayF;

/// One episode. Entry t holds the observation x_t, the action that led to it
/// (-1 at the first step), the reward received on arrival and the continue flag.
struct Episode {
  std::vector<ArrayF> obs;
  std::vector<int> actions;
  std::vector<float> rewards;
  std::vector<float> conts;

  int size() const { return static_cast<int>(obs.size()); }
  void push(ArrayF o, int action, float reward, float cont) {
    obs.push_back(std::move(o));
    actions.push_back(action);
    rewards.push_back(reward);
    conts.push_back(cont);
  }
  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Time-major batch of subsequences: entry t is a [B, ...] block.
struct Batch {
  int batch = 0;
  int length = 0;
  std::vector<ArrayF> obs;      // [B, obs_dim]
  std::vector<ArrayF> actions;  // [B, A] one-hot, zero row for "no action"
  std::vector<ArrayF> rewards;  // [B, 1]
  std::vector<ArrayF> conts;    // [B, 1]
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_steps = 100000) : capacity_(capacity_steps) {}

  /// Store a finished episode, evicting the oldest ones beyond capacity.
  void add(Episode ep);

  /// B subsequences of length L, each inside one episode. Episodes shorter
  /// than L are never drawn; throws if no episode is long enough.
  Batch sample(int batch, int length, int action_count, core::Rng& rng) const;

  bool can_sample(int length) const;
  std::size_t steps() const { return steps_; }
  std::size_t episode_count() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Episode>& episodes() const { return episodes_; }
  friend bool operator==(const ReplayBuffer&, const ReplayBuffer&) = default;

 private:
  std::size_t capacity_;
  std::size_t steps_ = 0;
  std::deque<Episode> episodes_;
};

}  // namespace dtii::train
