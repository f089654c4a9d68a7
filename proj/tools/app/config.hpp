#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtii/eval/harness.hpp"
#include "dtii/train/run.hpp"

namespace dtii::app {

/// Invalid or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepGrid {
  std::vector<ii::Objective> objectives;
  std::vector<int> rollouts;
  std::vector<std::string> checkpoints;
  std::vector<double> alpha_grid = eval::default_alpha_grid();
  std::vector<std::uint64_t> calibration_seeds = {900001, 900002, 900003, 900004, 900005};
};

struct RunConfig {
  env::Task task = env::Task::YMazePartial;
  int horizon = 0;
  std::uint64_t seed = 1;
  std::string out = "runs/default";

  model::WorldModelConfig model;
  train::TrainConfig train;
  train::RunSchedule schedule;

  ii::IIConfig ii;
  std::vector<std::uint64_t> seeds = eval::seed_range(1000000, 1000099);
  bool deterministic = true;
  std::vector<double> thresholds = {std::numeric_limits<double>::infinity()};

  SweepGrid sweep;

  eval::EnvSpec env_spec() const;
  /// Fills the observation shape and action count from the task and validates.
  void finalize();
  /// Canonical key=value text. The hash covers every field except `out`.
  std::string canonical() const;
  std::string hash() const;
};

RunConfig default_config();
/// INI file with [run], [model], [train], [ii], [eval] and [sweep] sections.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

std::vector<std::uint64_t> parse_seed_range(const std::string& spec);
std::vector<double> parse_thresholds(const std::string& spec);

}  // namespace dtii::app
