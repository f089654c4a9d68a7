#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "dtii/core/array.hpp"

namespace dtii::env {

enum class Observability { Partial, Full };

enum class Task { YMazePartial, YMazeFull, Collect };

Task parse_task(const std::string& name);
std::string task_name(Task task);

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Collision { None, Static, Dynamic };

struct StepInfo {
  int checkpoints_crossed = 0;  // number of distance checkpoints granted this step
  Collision collision = Collision::None;
  int pickup = -1;  // object type collected this step, -1 if none
};

struct StepResult {
  core::ArrayF observation;
  double reward = 0.0;
  int cont = 1;  // 0 exactly at termination
  StepInfo info;
};

/// Grid headings, clockwise from north.
enum class Heading { North = 0, East = 1, South = 2, West = 3 };

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

Cell step_towards(Cell c, Heading h, int distance = 1);
Heading turn_left(Heading h);
Heading turn_right(Heading h);

/// Three-action egocentric control shared by all tasks.
enum Action : int { kForward = 0, kTurnLeft = 1, kTurnRight = 2 };
inline constexpr int kActionCount = 3;

class Environment {
 public:
  virtual ~Environment() = default;

  virtual core::ArrayF reset(std::uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;

  /// Switch observation mode; only allowed before the first step of an episode.
  virtual void set_observability(Observability mode) = 0;
  virtual Observability observability() const = 0;

  /// [rows, cols, channels] of the current mode.
  virtual core::Shape observation_shape() const = 0;
  virtual int action_count() const { return kActionCount; }
  virtual std::pair<double, double> reward_bounds() const = 0;
  virtual int horizon() const = 0;
  virtual int steps_taken() const = 0;
  virtual bool done() const = 0;

  /// Plain-text dump of the layout for debugging.
  virtual std::string render() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

struct EnvOptions {
  int horizon = 0;  // 0 keeps the task default
  bool eval_split = false;
};

std::unique_ptr<Environment> make_environment(Task task, const EnvOptions& options = {});

}  // namespace dtii::env
