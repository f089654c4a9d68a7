#include "dtii/env/collect.hpp"

#include <algorithm>
#include <sstream>

namespace dtii::env {

namespace {

bool inside(Cell c) { return c.row >= 0 && c.row < Collect::kGrid && c.col >= 0 && c.col < Collect::kGrid; }
bool is_wall(Cell c) { return c.row == 0 || c.col == 0 || c.row == Collect::kGrid - 1 || c.col == Collect::kGrid - 1; }

}  // namespace

std::vector<Collect::Combination> Collect::combinations(bool eval_split) {
  // Held out: room 1 with (good 1, bad 3) and room 0 with (good 1, bad 2).
  const std::vector<Combination> held = {{1, 1, 3}, {0, 1, 2}};
  std::vector<Combination> out;
  for (int room = 0; room < 2; ++room)
    for (int good = 0; good < 2; ++good)
      for (int bad = 2; bad < 4; ++bad) {
        const Combination c{room, good, bad};
        const bool is_held = std::find(held.begin(), held.end(), c) != held.end();
        if (is_held == eval_split) out.push_back(c);
      }
  return out;
}

Collect::Collect(bool eval_split, int horizon, Observability mode)
    : eval_split_(eval_split), horizon_(horizon), mode_(mode) {
  if (horizon <= 0) throw EnvError("collect: horizon must be positive");
}

core::ArrayF Collect::reset(std::uint64_t seed) {
  core::Rng rng(core::Rng::derive(seed, 0xc011));
  const auto combos = combinations(eval_split_);
  combo_ = combos[rng.below(static_cast<int>(combos.size()))];
  for (auto& row : objects_) row.fill(-1);
  std::vector<Cell> free;
  for (int r = 1; r <= kSide; ++r)
    for (int c = 1; c <= kSide; ++c) free.push_back({r, c});
  // Partial shuffle: first slot is the agent, then good objects, then bad.
  const int needed = 1 + 2 * kObjectsPerKind;
  for (int k = 0; k < needed; ++k) std::swap(free[k], free[k + rng.below(static_cast<int>(free.size()) - k)]);
  agent_ = free[0];
  for (int k = 0; k < kObjectsPerKind; ++k) {
    objects_[free[1 + k].row][free[1 + k].col] = combo_.good_type;
    objects_[free[1 + kObjectsPerKind + k].row][free[1 + kObjectsPerKind + k].col] = combo_.bad_type;
  }
  heading_ = static_cast<Heading>(rng.below(4));
  t_ = 0;
  pickups_ = 0;
  done_ = false;
  started_ = false;
  return observe();
}

StepResult Collect::step(int action) {
  if (done_) throw EnvError("collect: step called on a finished episode");
  if (action < 0 || action >= kActionCount) throw EnvError("collect: invalid action " + std::to_string(action));
  started_ = true;
  StepResult res;
  if (action == kForward) {
    const Cell next = step_towards(agent_, heading_);
    if (!is_wall(next)) {
      agent_ = next;
      int& obj = objects_[agent_.row][agent_.col];
      if (obj >= 0) {
        res.reward = obj < 2 ? 1.0 : -1.0;
        res.info.pickup = obj;
        obj = -1;
        ++pickups_;
      }
    }
  } else {
    heading_ = action == kTurnLeft ? turn_left(heading_) : turn_right(heading_);
  }
  ++t_;
  done_ = pickups_ >= kPickupLimit || t_ >= horizon_;
  res.cont = done_ ? 0 : 1;
  res.observation = observe();
  return res;
}

void Collect::set_observability(Observability mode) {
  if (started_) throw EnvError("collect: observability can only change before the first step");
  mode_ = mode;
}

core::Shape Collect::observation_shape() const {
  if (mode_ == Observability::Partial) return {kWindow, kWindow, kBaseChannels};
  return {kGrid, kGrid, kFullChannels};
}

core::ArrayF Collect::observe() const {
  auto content = [&](Cell c) {
    if (!inside(c)) return 7;
    if (is_wall(c)) return 2;
    const int obj = objects_[c.row][c.col];
    if (obj >= 0) return 3 + obj;
    return combo_.room;
  };
  if (mode_ == Observability::Partial) {
    core::ArrayF obs({kWindow, kWindow, kBaseChannels}, 0.0f);
    const Heading right = turn_right(heading_);
    for (int wr = 0; wr < kWindow; ++wr)
      for (int wc = 0; wc < kWindow; ++wc) {
        Cell c = step_towards(agent_, heading_, kWindow - 1 - wr);
        c = step_towards(c, right, wc - kWindow / 2);
        obs[(static_cast<std::size_t>(wr) * kWindow + wc) * kBaseChannels + content(c)] = 1.0f;
      }
    return obs;
  }
  core::ArrayF obs({kGrid, kGrid, kFullChannels}, 0.0f);
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c) obs[(static_cast<std::size_t>(r) * kGrid + c) * kFullChannels + content({r, c})] = 1.0f;
  obs[(static_cast<std::size_t>(agent_.row) * kGrid + agent_.col) * kFullChannels + kBaseChannels +
      static_cast<int>(heading_)] = 1.0f;
  return obs;
}

std::string Collect::render() const {
  std::ostringstream os;
  for (int r = 0; r < kGrid; ++r) {
    for (int c = 0; c < kGrid; ++c) {
      const Cell cell{r, c};
      char ch = is_wall(cell) ? '#' : '.';
      const int obj = objects_[r][c];
      if (obj >= 0) ch = static_cast<char>('a' + obj);
      if (cell == agent_) ch = "^>v<"[static_cast<int>(heading_)];
      os << ch;
    }
    os << '\n';
  }
  os << "t=" << t_ << "/" << horizon_ << " pickups=" << pickups_ << " room=" << combo_.room << '\n';
  return os.str();
}

}  // namespace dtii::env
