#pragma once

#include <array>
#include <vector>

#include "dtii/core/rng.hpp"
#include "dtii/env/environment.hpp"

namespace dtii::env {

/// Seek-avoid collection in a walled arena. Object types 0 and 1 are good
/// (+1), types 2 and 3 are bad (-1). Each episode uses one room style, one good
/// type and one bad type; two of the eight combinations are reserved for
/// evaluation.
class Collect final : public Environment {
 public:
  static constexpr int kSide = 7;
  static constexpr int kGrid = kSide + 2;
  static constexpr int kDefaultHorizon = 300;
  static constexpr int kPickupLimit = 10;
  static constexpr int kObjectsPerKind = 12;
  static constexpr int kWindow = 5;

  // Channels: floor (room 0), floor (room 1), wall, object types 0-3, out of
  // bounds; full observability adds one channel per agent heading.
  static constexpr int kBaseChannels = 8;
  static constexpr int kFullChannels = kBaseChannels + 4;

  struct Combination {
    int room = 0;
    int good_type = 0;
    int bad_type = 2;
    friend bool operator==(const Combination&, const Combination&) = default;
  };

  static std::vector<Combination> combinations(bool eval_split);

  explicit Collect(bool eval_split = false, int horizon = kDefaultHorizon,
                   Observability mode = Observability::Partial);

  core::ArrayF reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  void set_observability(Observability mode) override;
  Observability observability() const override { return mode_; }
  core::Shape observation_shape() const override;
  std::pair<double, double> reward_bounds() const override { return {-1.0, 1.0}; }
  int horizon() const override { return horizon_; }
  int steps_taken() const override { return t_; }
  bool done() const override { return done_; }
  std::string render() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Collect>(*this); }

  const Combination& combination() const { return combo_; }
  int pickups() const { return pickups_; }
  Cell agent() const { return agent_; }
  /// Object type at a cell, -1 if empty.
  int object_at(Cell c) const { return objects_[c.row][c.col]; }

 private:
  core::ArrayF observe() const;

  bool eval_split_;
  int horizon_;
  Observability mode_;
  Combination combo_;
  std::array<std::array<int, kGrid>, kGrid> objects_{};
  Cell agent_;
  Heading heading_ = Heading::North;
  int t_ = 0;
  int pickups_ = 0;
  bool done_ = true;
  bool started_ = false;
};

}  // namespace dtii::env
