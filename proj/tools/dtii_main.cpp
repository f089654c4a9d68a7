#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <spdlog/spdlog.h>

#include "app/commands.hpp"

using namespace dtii;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::int64_t> steps;
  std::optional<std::string> objective;
  std::optional<int> rollout;
  std::optional<double> alpha;
  std::optional<std::string> seeds;
  std::optional<bool> deterministic;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI configuration file");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seeds", o.seeds, "seed list, e.g. 1..100 or 3,5,9");
  cmd->add_option("--deterministic", o.deterministic, "single-threaded, bit-reproducible evaluation");
}

app::RunConfig resolve(const Overrides& o) {
  auto cfg = o.config.empty() ? app::default_config() : app::load_config(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.steps) cfg.schedule.wm_steps = *o.steps;
  if (o.objective) {
    try {
      cfg.ii.objective = ii::parse_objective(*o.objective);
    } catch (const std::invalid_argument& e) {
      throw app::ConfigError(e.what());
    }
  }
  if (o.rollout) cfg.ii.rollout = *o.rollout;
  if (o.alpha) cfg.ii.alpha = *o.alpha;
  if (o.seeds) cfg.seeds = app::parse_seed_range(*o.seeds);
  if (o.deterministic) cfg.deterministic = *o.deterministic;
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Decision-time iterative inference over a recurrent latent world model"};
  cli.require_subcommand(1);
  Overrides o;

  auto* train = cli.add_subcommand("train", "train a world model and actor-critic");
  add_common(train, o);
  train->add_option("--steps", o.steps, "world-model update budget");
  std::optional<std::string> resume;
  train->add_option("--resume", resume, "continue from a saved training state");

  auto* evalc = cli.add_subcommand("eval", "evaluate one arm over a seed list");
  add_common(evalc, o);
  std::string checkpoint;
  evalc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evalc->add_option("--objective", o.objective, "sig, pig, ent or none");
  evalc->add_option("--rollout-len", o.rollout, "rollout length lambda");
  evalc->add_option("--alpha", o.alpha, "refinement step size");

  auto* comparec = cli.add_subcommand("compare", "compare a baseline results file against refined arms");
  std::string baseline;
  std::vector<std::string> arms;
  std::string thresholds = "inf";
  std::string compare_out;
  comparec->add_option("--baseline", baseline, "baseline results CSV")->required();
  comparec->add_option("--ii", arms, "refined-arm results CSV (repeatable)")->required();
  comparec->add_option("--thresholds", thresholds, "comma-separated baseline score thresholds");
  comparec->add_option("--out", compare_out, "directory for summary files");

  auto* sweep = cli.add_subcommand("sweep", "objective x rollout length x checkpoint grid");
  add_common(sweep, o);

  auto* show = cli.add_subcommand("config", "print the resolved configuration and its hash");
  add_common(show, o);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto cfg = resolve(o);
      const auto out = app::cmd_train(cfg, resume);
      std::cout << fmt::format("{} checkpoints in {}\n", out.checkpoints.size(), cfg.out);
    } else if (*evalc) {
      const auto cfg = resolve(o);
      const auto name = cfg.ii.bypass() ? std::string("eval_NONE.csv")
                                        : fmt::format("eval_{}_lam{}.csv", ii::objective_name(cfg.ii.objective),
                                                      cfg.ii.rollout);
      std::cout << app::cmd_eval(cfg, checkpoint, cfg.ii, (std::filesystem::path(cfg.out) / name).string()) << '\n';
    } else if (*comparec) {
      const auto out = app::cmd_compare(baseline, arms, app::parse_thresholds(thresholds), compare_out);
      std::cout << out.table;
    } else if (*show) {
      const auto cfg = resolve(o);
      std::cout << "# config_hash=" << cfg.hash() << '\n' << cfg.canonical();
    } else if (*sweep) {
      const auto cfg = resolve(o);
      const auto out = app::cmd_sweep(cfg);
      std::cout << fmt::format("{} cells, {} calibrations, {} failures\n", out.plan.cells.size(),
                               out.plan.calibrations.size(), out.failures.size());
      if (!out.failures.empty()) return 1;
    }
  } catch (const app::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const io::DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
