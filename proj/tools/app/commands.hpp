#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "app/results_csv.hpp"

namespace dtii::app {

struct TrainOutput {
  std::vector<std::string> checkpoints;
  std::string loss_csv;
  std::string state_file;
  std::vector<double> losses;
};

/// Train from scratch, or continue from a saved training state. Writes a
/// checkpoint at step 0 and every `checkpoint_every` steps, the resumable
/// state alongside, and the loss trace.
TrainOutput cmd_train(const RunConfig& cfg, const std::optional<std::string>& resume = {});

std::string checkpoint_name(std::int64_t step);

/// Runs one arm over the configured seeds and writes a results file.
std::string cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const ii::IIConfig& arm,
                     const std::string& out_file);

struct CompareOutput {
  eval::ComparisonSummary summary;
  std::string table;
  std::string summary_csv;
  struct Best {
    ii::Objective objective;
    eval::BestLambda score;
  };
  std::vector<Best> best;
};

/// Baseline against one or more refined arms. With several arms, the best
/// rollout length per objective is chosen on episode score.
CompareOutput cmd_compare(const std::string& baseline_csv, const std::vector<std::string>& ii_csvs,
                          const std::vector<double>& thresholds, const std::string& out_dir);

struct SweepCell {
  std::string checkpoint;
  ii::Objective objective;
  int rollout;
};

struct SweepPlan {
  std::vector<SweepCell> cells;
  /// One alpha calibration per (checkpoint, objective).
  std::vector<std::pair<std::string, ii::Objective>> calibrations;
  bool empty() const { return cells.empty(); }
};

SweepPlan plan_sweep(const SweepGrid& grid);

struct SweepOutput {
  SweepPlan plan;
  std::vector<std::string> results;
  std::vector<std::string> failures;
  std::vector<eval::AlphaCalibration> calibrations;
};

SweepOutput cmd_sweep(const RunConfig& cfg);

}  // namespace dtii::app
