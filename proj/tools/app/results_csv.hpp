#pragma once

#include <map>
#include <string>
#include <vector>

#include "dtii/eval/harness.hpp"

namespace dtii::app {

inline constexpr int kResultsVersion = 1;

/// Header metadata carried by every results file.
struct ResultsMeta {
  std::string config_hash;
  std::string checkpoint;
  ii::Objective objective = ii::Objective::None;
  int rollout = 0;
  double alpha = 0;
  std::map<std::string, std::string> extra;
};

struct ResultsFile {
  ResultsMeta meta;
  std::vector<eval::EpisodeRecord> episodes;
};

std::vector<std::string> step_columns();

/// One row per step followed by one summary row per episode.
std::string format_results(const ResultsFile& f);
/// Throws io::DataError on an unknown version or a schema mismatch.
ResultsFile parse_results(const std::string& text);

void write_results(const std::string& path, const ResultsFile& f);
ResultsFile read_results(const std::string& path);

}  // namespace dtii::app
