#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtii/env/environment.hpp"
#include "dtii/eval/metrics.hpp"
#include "dtii/ii/engine.hpp"

namespace dtii::eval {

using ii::IIConfig;
using model::WorldModelParams;
using train::ActorCriticParams;

enum StepFlag : int {
  kFlagNonFinite = 1,  // refinement hit a non-finite value
  kFlagError = 2,      // environment or refinement threw; episode truncated
};

struct StepRecord {
  int step = 0;
  int action = 0;
  double reward = 0;
  Metrics pre;
  Metrics post;
  double obj_iter0 = 0;
  double obj_itern = 0;
  double grad_norm_mean = 0;
  int flags = 0;
};

/// Outcome equality leaves out the objective trace summary: a bypassed arm
/// records no objective values but must still match a zero-step arm.
bool same_outcome(const StepRecord& a, const StepRecord& b);

struct EpisodeRecord {
  std::uint64_t seed = 0;
  bool refined = false;  // II arm; false for the bypass arm
  std::vector<StepRecord> steps;
  double score = 0;
  int flags = 0;

  int length() const { return static_cast<int>(steps.size()); }
  double mean_pre_mse() const;
  double mean_post_mse() const;
  /// Mean of (post - pre) reconstruction MSE over steps.
  double immediate_impact() const;
};

bool same_outcome(const EpisodeRecord& a, const EpisodeRecord& b);

struct EnvSpec {
  env::Task task = env::Task::YMazePartial;
  env::EnvOptions options;
};

/// Seed of the refinement stream for an episode, independent of the environment seed stream.
std::uint64_t refine_stream(std::uint64_t seed);

EpisodeRecord run_episode(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                          const IIConfig& cfg, std::uint64_t seed);

/// One record per seed, in seed order. Episodes run in parallel over seeds.
std::vector<EpisodeRecord> run_episodes(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                        const IIConfig& cfg, const std::vector<std::uint64_t>& seeds);

/// Episodes with a uniformly random policy and no model.
std::vector<double> random_policy_scores(const EnvSpec& spec, const std::vector<std::uint64_t>& seeds);

/// Mean per-step reconstruction MSE of the filtered (mode-latent) state on the
/// random-policy trajectories of `seeds`. Every model sees the same observations.
double heldout_reconstruction_mse(const WorldModelParams& wm, const EnvSpec& spec,
                                  const std::vector<std::uint64_t>& seeds);

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t last);

// Statistics ---------------------------------------------------------------

struct TestResult {
  bool valid = false;  // false with fewer than two samples per arm or zero variance
  double mean_diff = 0;  // second minus first
  double t = 0;
  double df = 0;
  double p = 1;
  bool significant() const { return valid && p < 0.05; }
};

TestResult welch_test(const std::vector<double>& a, const std::vector<double>& b);
TestResult paired_test(const std::vector<double>& a, const std::vector<double>& b);

double mean_of(const std::vector<double>& xs);
double sd_of(const std::vector<double>& xs);

struct MetricComparison {
  std::string name;
  double mean_a = 0, sd_a = 0;
  double mean_b = 0, sd_b = 0;
  double sd_steps_a = 0, sd_steps_b = 0;  // spread over all steps rather than episodes
  TestResult welch;
  std::optional<TestResult> paired;
};

struct Bucket {
  double threshold = 0;
  std::size_t count = 0;
  double fraction = 0;
  std::optional<double> mean_baseline;
  std::optional<double> mean_ii;
  std::optional<TestResult> test;
};

struct ComparisonSummary {
  std::size_t episodes_a = 0, episodes_b = 0;
  std::vector<MetricComparison> metrics;
  std::vector<Bucket> buckets;
  bool paired = false;
  const MetricComparison& metric(const std::string& name) const;
};

/// Per-episode metric extractors used by compare: score, length, episode means
/// of the pre/post metric triples and the immediate impact.
std::vector<std::string> metric_names();
double episode_metric(const EpisodeRecord& e, const std::string& name);

ComparisonSummary compare(const std::vector<EpisodeRecord>& a, const std::vector<EpisodeRecord>& b,
                          const std::vector<double>& thresholds = {});

/// Buckets of matched pairs whose baseline score is at most each threshold.
std::vector<Bucket> threshold_analysis(const std::vector<EpisodeRecord>& baseline, const std::vector<EpisodeRecord>& ii,
                                       const std::vector<double>& thresholds);

struct LambdaResult {
  int lambda = 0;
  double mean = 0;
  bool significant = false;
};

struct BestLambda {
  double value = 0;
  int lambda = -1;  // -1 when the baseline value is reported
};

/// Highest significant improvement over the baseline; the baseline value otherwise.
BestLambda best_lambda(double baseline_mean, const std::vector<LambdaResult>& results, bool higher_is_better = true);

// Calibration --------------------------------------------------------------

struct AlphaTrial {
  double alpha = 0;
  double mean_iter0 = 0;
  double mean_itern = 0;
  bool accepted = false;
};

struct AlphaCalibration {
  double alpha = 0;
  std::vector<AlphaTrial> trials;
};

std::vector<double> default_alpha_grid();

/// Largest alpha whose mean objective at the last iteration does not exceed
/// the mean at iteration 0 over the calibration episodes. Falls back to the
/// smallest grid value when none qualifies.
AlphaCalibration calibrate_alpha(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                 const IIConfig& cfg, const std::vector<double>& grid,
                                 const std::vector<std::uint64_t>& seeds);

/// Objective scale that brings the mean objective on a baseline episode to the
/// regularizer floor.
double calibrate_objective_scale(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                 const IIConfig& cfg, std::uint64_t seed);

}  // namespace dtii::eval
