#include "dtii/train/replay.hpp"

#include <stdexcept>
#include <string>

namespace dtii::train {

void ReplayBuffer::add(Episode ep) {
  if (ep.size() == 0) return;
  if (ep.actions.size() != ep.obs.size() || ep.rewards.size() != ep.obs.size() || ep.conts.size() != ep.obs.size())
    throw std::invalid_argument("replay: episode fields have different lengths");
  steps_ += static_cast<std::size_t>(ep.size());
  episodes_.push_back(std::move(ep));
  while (steps_ > capacity_ && episodes_.size() > 1) {
    steps_ -= static_cast<std::size_t>(episodes_.front().size());
    episodes_.pop_front();
  }
}

bool ReplayBuffer::can_sample(int length) const {
  for (const auto& ep : episodes_)
    if (ep.size() >= length) return true;
  return false;
}

Batch ReplayBuffer::sample(int batch, int length, int action_count, core::Rng& rng) const {
  if (batch < 1 || length < 1) throw std::invalid_argument("replay: batch and length must be positive");
  std::vector<std::size_t> cum;
  std::size_t total = 0;
  for (const auto& ep : episodes_) {
    if (ep.size() >= length) total += static_cast<std::size_t>(ep.size() - length + 1);
    cum.push_back(total);
  }
  if (total == 0) throw std::runtime_error("replay: no episode of length " + std::to_string(length));
  const int obs_dim = static_cast<int>(episodes_.front().obs.front().size());

  Batch b;
  b.batch = batch;
  b.length = length;
  for (int t = 0; t < length; ++t) {
    b.obs.emplace_back(core::Shape{batch, obs_dim}, 0.0f);
    b.actions.emplace_back(core::Shape{batch, action_count}, 0.0f);
    b.rewards.emplace_back(core::Shape{batch, 1}, 0.0f);
    b.conts.emplace_back(core::Shape{batch, 1}, 0.0f);
  }
  for (int i = 0; i < batch; ++i) {
    const std::size_t pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total));
    std::size_t e = 0;
    while (cum[e] <= pick) ++e;
    const std::size_t before = e == 0 ? 0 : cum[e - 1];
    const int start = static_cast<int>(pick - before);
    const Episode& ep = episodes_[e];
    for (int t = 0; t < length; ++t) {
      const int s = start + t;
      std::copy(ep.obs[s].data(), ep.obs[s].data() + obs_dim, b.obs[t].data() + static_cast<std::size_t>(i) * obs_dim);
      if (ep.actions[s] >= 0) b.actions[t].at(i, ep.actions[s]) = 1.0f;
      b.rewards[t][i] = ep.rewards[s];
      b.conts[t][i] = ep.conts[s];
    }
  }
  return b;
}

}  // namespace dtii::train
