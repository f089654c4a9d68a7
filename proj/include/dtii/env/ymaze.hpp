#pragma once

#include <array>
#include <vector>

#include "dtii/core/rng.hpp"
#include "dtii/env/environment.hpp"

namespace dtii::env {

/// Reward for a distance checkpoint crossed at step t of a T-step episode.
double checkpoint_reward(int t, int horizon);

/// Three hallways (west, north, east) meeting at a 3x3 hub. The target sits in
/// the far third of one hallway, one dynamic obstacle patrols across the middle
/// third of every hallway, and 0-3 static obstacles sit in the near third.
class YMaze final : public Environment {
 public:
  static constexpr int kHallLength = 6;
  static constexpr int kHallWidth = 3;
  static constexpr int kRows = kHallLength + kHallWidth + 2;
  static constexpr int kCols = 2 * kHallLength + kHallWidth + 2;
  static constexpr int kDefaultHorizon = 400;
  static constexpr int kWindow = 5;

  static constexpr double kStaticPenalty = -0.05;
  static constexpr double kDynamicPenalty = -0.1;

  // Channels: floor, wall, static obstacle, dynamic obstacle, target, out of
  // bounds; full observability adds one channel per agent heading.
  static constexpr int kBaseChannels = 6;
  static constexpr int kFullChannels = kBaseChannels + 4;

  enum Arm { kWest = 0, kNorth = 1, kEast = 2 };

  struct DynamicObstacle {
    int arm = 0;
    int along = 0;  // position along the hallway axis, fixed
    int phase = 0;  // offset into the across-hallway patrol cycle
  };

  struct Layout {
    std::array<std::array<char, kCols>, kRows> walls{};  // 1 where wall
    std::vector<Cell> static_obstacles;
    std::array<int, 3> static_per_arm{};
    std::vector<DynamicObstacle> dynamic_obstacles;
    int target_arm = 0;
    Cell target;
    Cell start;
    Heading start_heading = Heading::North;
  };

  explicit YMaze(int horizon = kDefaultHorizon, Observability mode = Observability::Partial);

  core::ArrayF reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  void set_observability(Observability mode) override;
  Observability observability() const override { return mode_; }
  core::Shape observation_shape() const override;
  std::pair<double, double> reward_bounds() const override { return {kDynamicPenalty, 1.0 / 3.0}; }
  int horizon() const override { return horizon_; }
  int steps_taken() const override { return t_; }
  bool done() const override { return done_; }
  std::string render() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<YMaze>(*this); }

  const Layout& layout() const { return layout_; }
  Cell agent() const { return agent_; }
  Heading heading() const { return heading_; }
  int initial_distance() const { return initial_distance_; }
  int distance_to_target() const;
  int checkpoints_granted() const { return checkpoints_granted_; }
  std::vector<Cell> dynamic_positions(int t) const;

  static Layout generate(std::uint64_t seed);

 private:
  core::ArrayF observe() const;
  bool blocked(Cell c) const;
  bool is_static(Cell c) const;
  void compute_distances();

  int horizon_;
  Observability mode_;
  Layout layout_;
  std::array<std::array<int, kCols>, kRows> dist_{};
  Cell agent_;
  Heading heading_ = Heading::North;
  int t_ = 0;
  int initial_distance_ = 0;
  int checkpoints_granted_ = 0;
  bool done_ = true;
  bool started_ = false;
};

}  // namespace dtii::env
