#include "dtii/env/ymaze.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace dtii::env {

namespace {

constexpr int kHubRow = YMaze::kHallLength + 1;  // first hub row
constexpr int kHubCol = YMaze::kHallLength + 1;  // first hub column
constexpr std::array<int, 4> kPatrol = {0, 1, 2, 1};

/// Cell at distance `along` from the hub and lateral index `across` in an arm.
Cell arm_cell(int arm, int along, int across) {
  switch (arm) {
    case YMaze::kWest: return {kHubRow + across, kHubCol - 1 - along};
    case YMaze::kNorth: return {kHubRow - 1 - along, kHubCol + across};
    default: return {kHubRow + across, kHubCol + YMaze::kHallWidth + along};
  }
}

bool in_grid(Cell c) { return c.row >= 0 && c.row < YMaze::kRows && c.col >= 0 && c.col < YMaze::kCols; }

}  // namespace

double checkpoint_reward(int t, int horizon) {
  return (1.0 / 3.0) * (1.0 - 0.2 * static_cast<double>(t) / static_cast<double>(horizon));
}

YMaze::YMaze(int horizon, Observability mode) : horizon_(horizon), mode_(mode) {
  if (horizon <= 0) throw EnvError("ymaze: horizon must be positive");
}

YMaze::Layout YMaze::generate(std::uint64_t seed) {
  core::Rng rng(core::Rng::derive(seed, 0x9a2e));
  Layout lay;
  for (auto& row : lay.walls) row.fill(1);
  for (int r = 0; r < kHallWidth; ++r)
    for (int c = 0; c < kHallWidth; ++c) lay.walls[kHubRow + r][kHubCol + c] = 0;
  for (int arm = 0; arm < 3; ++arm)
    for (int a = 0; a < kHallLength; ++a)
      for (int w = 0; w < kHallWidth; ++w) {
        const Cell c = arm_cell(arm, a, w);
        lay.walls[c.row][c.col] = 0;
      }

  lay.start = {kHubRow + 1, kHubCol + 1};
  lay.start_heading = static_cast<Heading>(rng.below(4));
  lay.target_arm = rng.below(3);
  const int third = kHallLength / 3;
  lay.target = arm_cell(lay.target_arm, 2 * third + rng.below(third), rng.below(kHallWidth));

  for (int arm = 0; arm < 3; ++arm)
    lay.dynamic_obstacles.push_back({arm, third + rng.below(third), rng.below(static_cast<int>(kPatrol.size()))});

  // Static obstacles: resample until the target stays reachable.
  for (;;) {
    lay.static_obstacles.clear();
    for (int arm = 0; arm < 3; ++arm) {
      const int count = rng.below(4);
      lay.static_per_arm[arm] = count;
      std::vector<Cell> slots;
      for (int a = 0; a < third; ++a)
        for (int w = 0; w < kHallWidth; ++w) slots.push_back(arm_cell(arm, a, w));
      for (int k = 0; k < count; ++k) {
        const int pick = k + rng.below(static_cast<int>(slots.size()) - k);
        std::swap(slots[k], slots[pick]);
        lay.static_obstacles.push_back(slots[k]);
      }
    }
    std::array<std::array<char, kCols>, kRows> seen{};
    std::deque<Cell> frontier{lay.start};
    seen[lay.start.row][lay.start.col] = 1;
    bool reachable = false;
    while (!frontier.empty()) {
      const Cell c = frontier.front();
      frontier.pop_front();
      if (c == lay.target) {
        reachable = true;
        break;
      }
      for (int h = 0; h < 4; ++h) {
        const Cell n = step_towards(c, static_cast<Heading>(h));
        if (!in_grid(n) || seen[n.row][n.col] || lay.walls[n.row][n.col]) continue;
        if (std::find(lay.static_obstacles.begin(), lay.static_obstacles.end(), n) != lay.static_obstacles.end())
          continue;
        seen[n.row][n.col] = 1;
        frontier.push_back(n);
      }
    }
    if (reachable) break;
  }
  return lay;
}

core::ArrayF YMaze::reset(std::uint64_t seed) {
  layout_ = generate(seed);
  agent_ = layout_.start;
  heading_ = layout_.start_heading;
  t_ = 0;
  checkpoints_granted_ = 0;
  done_ = false;
  started_ = false;
  compute_distances();
  initial_distance_ = dist_[agent_.row][agent_.col];
  return observe();
}

void YMaze::compute_distances() {
  for (auto& row : dist_) row.fill(-1);
  std::deque<Cell> frontier{layout_.target};
  dist_[layout_.target.row][layout_.target.col] = 0;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (int h = 0; h < 4; ++h) {
      const Cell n = step_towards(c, static_cast<Heading>(h));
      if (!in_grid(n) || dist_[n.row][n.col] >= 0 || blocked(n)) continue;
      dist_[n.row][n.col] = dist_[c.row][c.col] + 1;
      frontier.push_back(n);
    }
  }
}

bool YMaze::is_static(Cell c) const {
  return std::find(layout_.static_obstacles.begin(), layout_.static_obstacles.end(), c) !=
         layout_.static_obstacles.end();
}

bool YMaze::blocked(Cell c) const { return layout_.walls[c.row][c.col] || is_static(c); }

int YMaze::distance_to_target() const { return dist_[agent_.row][agent_.col]; }

std::vector<Cell> YMaze::dynamic_positions(int t) const {
  std::vector<Cell> out;
  for (const auto& d : layout_.dynamic_obstacles)
    out.push_back(arm_cell(d.arm, d.along, kPatrol[(t + d.phase) % kPatrol.size()]));
  return out;
}

StepResult YMaze::step(int action) {
  if (done_) throw EnvError("ymaze: step called on a finished episode");
  if (action < 0 || action >= kActionCount) throw EnvError("ymaze: invalid action " + std::to_string(action));
  started_ = true;
  StepResult res;
  bool static_hit = false;
  if (action == kForward) {
    const Cell next = step_towards(agent_, heading_);
    if (layout_.walls[next.row][next.col]) {
      // bump into wall: no move, no penalty
    } else if (is_static(next)) {
      static_hit = true;
    } else {
      agent_ = next;
    }
  } else if (action == kTurnLeft) {
    heading_ = turn_left(heading_);
  } else {
    heading_ = turn_right(heading_);
  }
  const int t_before = t_;
  ++t_;

  const auto dyn = dynamic_positions(t_);
  const bool dynamic_hit = std::find(dyn.begin(), dyn.end(), agent_) != dyn.end();

  // Checkpoints at 2/3 D, 1/3 D and contact, granted once each in order.
  const int d = distance_to_target();
  const int big_d = initial_distance_;
  auto reached = [&](int k) {
    switch (k) {
      case 1: return 3 * d <= 2 * big_d;
      case 2: return 3 * d <= big_d;
      default: return d == 0;
    }
  };
  while (checkpoints_granted_ < 3 && reached(checkpoints_granted_ + 1)) {
    ++checkpoints_granted_;
    ++res.info.checkpoints_crossed;
    res.reward += checkpoint_reward(t_before, horizon_);
  }

  if (dynamic_hit) {
    res.reward += kDynamicPenalty;
    res.info.collision = Collision::Dynamic;
  } else if (static_hit) {
    res.reward += kStaticPenalty;
    res.info.collision = Collision::Static;
  }

  done_ = d == 0 || t_ >= horizon_;
  res.cont = done_ ? 0 : 1;
  res.observation = observe();
  return res;
}

void YMaze::set_observability(Observability mode) {
  if (started_) throw EnvError("ymaze: observability can only change before the first step");
  mode_ = mode;
}

core::Shape YMaze::observation_shape() const {
  if (mode_ == Observability::Partial) return {kWindow, kWindow, kBaseChannels};
  return {kRows, kCols, kFullChannels};
}

core::ArrayF YMaze::observe() const {
  const auto dyn = dynamic_positions(t_);
  auto content = [&](Cell c) {
    if (!in_grid(c)) return 5;
    if (layout_.walls[c.row][c.col]) return 1;
    if (is_static(c)) return 2;
    if (std::find(dyn.begin(), dyn.end(), c) != dyn.end()) return 3;
    if (c == layout_.target) return 4;
    return 0;
  };
  if (mode_ == Observability::Partial) {
    core::ArrayF obs({kWindow, kWindow, kBaseChannels}, 0.0f);
    const Heading right = turn_right(heading_);
    for (int wr = 0; wr < kWindow; ++wr)
      for (int wc = 0; wc < kWindow; ++wc) {
        const int fwd = kWindow - 1 - wr;
        const int lat = wc - kWindow / 2;
        Cell c = step_towards(agent_, heading_, fwd);
        c = step_towards(c, right, lat);
        obs[(static_cast<std::size_t>(wr) * kWindow + wc) * kBaseChannels + content(c)] = 1.0f;
      }
    return obs;
  }
  core::ArrayF obs({kRows, kCols, kFullChannels}, 0.0f);
  for (int r = 0; r < kRows; ++r)
    for (int c = 0; c < kCols; ++c) obs[(static_cast<std::size_t>(r) * kCols + c) * kFullChannels + content({r, c})] = 1.0f;
  obs[(static_cast<std::size_t>(agent_.row) * kCols + agent_.col) * kFullChannels + kBaseChannels +
      static_cast<int>(heading_)] = 1.0f;
  return obs;
}

std::string YMaze::render() const {
  const auto dyn = dynamic_positions(t_);
  std::ostringstream os;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      const Cell cell{r, c};
      char ch = '.';
      if (layout_.walls[r][c]) ch = '#';
      else if (is_static(cell)) ch = 'o';
      else if (std::find(dyn.begin(), dyn.end(), cell) != dyn.end()) ch = 'x';
      else if (cell == layout_.target) ch = 'T';
      if (cell == agent_) ch = "^>v<"[static_cast<int>(heading_)];
      os << ch;
    }
    os << '\n';
  }
  os << "t=" << t_ << "/" << horizon_ << " D=" << initial_distance_ << " d=" << distance_to_target() << '\n';
  return os.str();
}

}  // namespace dtii::env
