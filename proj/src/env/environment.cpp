#include "dtii/env/environment.hpp"

#include "dtii/env/collect.hpp"
#include "dtii/env/ymaze.hpp"

namespace dtii::env {

Task parse_task(const std::string& name) {
  if (name == "ymaze-po") return Task::YMazePartial;
  if (name == "ymaze-fo") return Task::YMazeFull;
  if (name == "collect") return Task::Collect;
  throw std::invalid_argument("unknown task '" + name + "' (expected ymaze-po, ymaze-fo or collect)");
}

std::string task_name(Task task) {
  switch (task) {
    case Task::YMazePartial: return "ymaze-po";
    case Task::YMazeFull: return "ymaze-fo";
    case Task::Collect: return "collect";
  }
  return "?";
}

Cell step_towards(Cell c, Heading h, int distance) {
  switch (h) {
    case Heading::North: return {c.row - distance, c.col};
    case Heading::East: return {c.row, c.col + distance};
    case Heading::South: return {c.row + distance, c.col};
    case Heading::West: return {c.row, c.col - distance};
  }
  return c;
}

Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

std::unique_ptr<Environment> make_environment(Task task, const EnvOptions& options) {
  switch (task) {
    case Task::YMazePartial:
      return std::make_unique<YMaze>(options.horizon > 0 ? options.horizon : YMaze::kDefaultHorizon,
                                     Observability::Partial);
    case Task::YMazeFull:
      return std::make_unique<YMaze>(options.horizon > 0 ? options.horizon : YMaze::kDefaultHorizon,
                                     Observability::Full);
    case Task::Collect:
      return std::make_unique<Collect>(options.eval_split,
                                       options.horizon > 0 ? options.horizon : Collect::kDefaultHorizon,
                                       Observability::Partial);
  }
  throw std::invalid_argument("unknown task");
}

}  // namespace dtii::env
