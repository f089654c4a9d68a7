#include "app/commands.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <map>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "dtii/io/checkpoint.hpp"

namespace dtii::app {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir);
  const auto probe = fs::path(dir) / ".write_probe";
  try {
    io::write_file(probe.string(), "");
  } catch (const std::exception&) {
    throw std::runtime_error("output directory " + dir + " is not writable");
  }
  fs::remove(probe, ec);
}

std::string fmt_p(const eval::TestResult& t) { return t.valid ? fmt::format("{:.4g}", t.p) : "na"; }

std::string lower_name(ii::Objective o) {
  auto s = ii::objective_name(o);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void write_losses(const std::string& path, const RunConfig& cfg, const std::vector<double>& losses) {
  std::string text = "# dtii-loss v1\n# config_hash=" + cfg.hash() + "\nstep,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) text += fmt::format("{},{:.17g}\n", i + 1, losses[i]);
  io::write_file(path, text);
}

}  // namespace

std::string checkpoint_name(std::int64_t step) { return fmt::format("ckpt_{:08d}.wmck", step); }

TrainOutput cmd_train(const RunConfig& cfg, const std::optional<std::string>& resume) {
  ensure_dir(cfg.out);
  TrainOutput out;
  out.state_file = (fs::path(cfg.out) / "train_state.bin").string();
  out.loss_csv = (fs::path(cfg.out) / "loss.csv").string();
  train::TrainingRun run(cfg.model, cfg.train, cfg.schedule, cfg.task, cfg.env_spec().options, cfg.seed);

  auto save = [&] {
    const auto path = (fs::path(cfg.out) / checkpoint_name(run.steps())).string();
    io::save_checkpoint(path, run.checkpoint());
    io::write_file(out.state_file, run.encode_state());
    write_losses(out.loss_csv, cfg, run.loss_trace());
    out.checkpoints.push_back(path);
    spdlog::info("step {}: wrote {}", run.steps(), path);
  };

  if (resume) {
    run.restore_state(io::read_file(*resume));
    spdlog::info("resumed at step {}", run.steps());
  } else {
    save();
  }
  while (!run.finished()) {
    run.step();
    if (run.steps() % 1000 == 0) {
      const auto& l = run.last_step().loss;
      spdlog::info("step {} loss {:.3f} recon {:.3f} kl {:.3f} return {:.3f}", run.steps(), l.total, l.recon,
                   l.kl_raw, run.last_ac_step().mean_return);
    }
    if (run.at_checkpoint()) save();
  }
  if (run.steps() > 0 && !run.at_checkpoint()) save();
  write_losses(out.loss_csv, cfg, run.loss_trace());
  out.losses = run.loss_trace();
  return out;
}

std::string cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const ii::IIConfig& arm,
                     const std::string& out_file) {
  const auto ck = io::load_checkpoint(checkpoint, cfg.model);
  if (cfg.deterministic) omp_set_num_threads(1);
  ResultsFile f;
  f.meta.config_hash = cfg.hash();
  f.meta.checkpoint = fs::path(checkpoint).filename().string();
  f.meta.objective = arm.objective;
  f.meta.rollout = arm.rollout;
  f.meta.alpha = arm.alpha;
  f.meta.extra["iterations"] = std::to_string(arm.iterations);
  f.meta.extra["samples"] = std::to_string(arm.samples);
  f.meta.extra["obj_scale"] = fmt::format("{:.17g}", arm.obj_scale);
  f.meta.extra["task"] = env::task_name(cfg.task);
  f.episodes = eval::run_episodes(ck.wm, ck.ac, cfg.env_spec(), arm, cfg.seeds);
  const auto parent = fs::path(out_file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  write_results(out_file, f);
  double score = 0;
  for (const auto& e : f.episodes) score += e.score;
  spdlog::info("{}: {} episodes, mean score {:.3f}", out_file, f.episodes.size(),
               score / static_cast<double>(f.episodes.size()));
  return out_file;
}

CompareOutput cmd_compare(const std::string& baseline_csv, const std::vector<std::string>& ii_csvs,
                          const std::vector<double>& thresholds, const std::string& out_dir) {
  if (ii_csvs.empty()) throw ConfigError("compare needs at least one refined arm");
  const auto base = read_results(baseline_csv);
  CompareOutput out;
  std::string table;
  std::string csv =
      "# dtii-summary v1\narm,objective,rollout,metric,mean_a,sd_a,mean_b,sd_b,sd_steps_a,sd_steps_b,diff,p_welch,"
      "p_paired,significant\n";
  std::string buckets = "arm,threshold,count,fraction,mean_baseline,mean_ii,p_paired\n";
  std::map<ii::Objective, std::vector<eval::LambdaResult>> by_objective;
  const double base_score = [&] {
    double s = 0;
    for (const auto& e : base.episodes) s += e.score;
    return base.episodes.empty() ? 0.0 : s / static_cast<double>(base.episodes.size());
  }();

  for (std::size_t k = 0; k < ii_csvs.size(); ++k) {
    const auto arm = read_results(ii_csvs[k]);
    const auto summary = eval::compare(base.episodes, arm.episodes, thresholds);
    if (k == 0) out.summary = summary;
    const std::string label = fs::path(ii_csvs[k]).filename().string();
    table += fmt::format("{} ({} lambda={}) vs {}\n", label, ii::objective_name(arm.meta.objective),
                         arm.meta.rollout, fs::path(baseline_csv).filename().string());
    table += fmt::format("  {:<14} {:>12} {:>12} {:>12} {:>10} {:>10}\n", "metric", "baseline", "refined", "diff",
                         "p(welch)", "p(paired)");
    for (const auto& m : summary.metrics) {
      const bool sig = m.paired ? m.paired->significant() : m.welch.significant();
      table += fmt::format("  {:<14} {:>12.5g} {:>12.5g} {:>12.5g} {:>10} {:>10}{}\n", m.name, m.mean_a, m.mean_b,
                           m.mean_b - m.mean_a, fmt_p(m.welch), m.paired ? fmt_p(*m.paired) : "na", sig ? " *" : "");
      csv += fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}\n", label,
                         ii::objective_name(arm.meta.objective), arm.meta.rollout, m.name, m.mean_a, m.sd_a,
                         m.mean_b, m.sd_b, m.sd_steps_a, m.sd_steps_b, m.mean_b - m.mean_a, fmt_p(m.welch),
                         m.paired ? fmt_p(*m.paired) : "na", sig ? 1 : 0);
    }
    if (!summary.buckets.empty()) {
      table += fmt::format("  {:>10} {:>11} {:>10} {:>10}\n", "threshold", "% episodes", "baseline", "refined");
      for (const auto& b : summary.buckets) {
        const auto fmt_opt = [](const std::optional<double>& v) {
          return v ? fmt::format("{:.3f}", *v) : std::string("-");
        };
        table += fmt::format("  {:>10} {:>10.0f}% {:>10} {:>10}{}\n",
                             std::isinf(b.threshold) ? std::string("all") : fmt::format("{:g}", b.threshold),
                             100.0 * b.fraction, fmt_opt(b.mean_baseline), fmt_opt(b.mean_ii),
                             b.test && b.test->significant() ? " *" : "");
        buckets += fmt::format("{},{},{},{:.6f},{},{},{}\n", label, fmt::format("{:g}", b.threshold), b.count,
                               b.fraction, fmt_opt(b.mean_baseline), fmt_opt(b.mean_ii),
                               b.test ? fmt_p(*b.test) : "na");
      }
    }
    const auto& score = summary.metric("score");
    const bool sig = score.paired ? score.paired->significant() : score.welch.significant();
    by_objective[arm.meta.objective].push_back({arm.meta.rollout, score.mean_b, sig && score.mean_b > score.mean_a});
  }
  for (const auto& [objective, results] : by_objective) {
    const auto best = eval::best_lambda(base_score, results);
    out.best.push_back({objective, best});
    table += best.lambda < 0
                 ? fmt::format("best {}: no significant improvement, baseline score {:.3f}\n",
                               ii::objective_name(objective), best.value)
                 : fmt::format("best {}: lambda={} score {:.3f}\n", ii::objective_name(objective), best.lambda,
                               best.value);
  }
  out.table = table;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    out.summary_csv = (fs::path(out_dir) / "summary.csv").string();
    io::write_file(out.summary_csv, csv);
    io::write_file((fs::path(out_dir) / "buckets.csv").string(), buckets);
  }
  return out;
}

SweepPlan plan_sweep(const SweepGrid& grid) {
  SweepPlan plan;
  for (const auto& ck : grid.checkpoints)
    for (auto o : grid.objectives) {
      if (o == ii::Objective::None) continue;
      if (grid.rollouts.empty()) continue;
      plan.calibrations.emplace_back(ck, o);
      for (int r : grid.rollouts) plan.cells.push_back({ck, o, r});
    }
  return plan;
}

SweepOutput cmd_sweep(const RunConfig& cfg) {
  SweepOutput out;
  out.plan = plan_sweep(cfg.sweep);
  if (out.plan.empty()) {
    spdlog::warn("sweep grid is empty; nothing to do");
    return out;
  }
  ensure_dir(cfg.out);
  const auto spec = cfg.env_spec();
  int min_rollout = cfg.sweep.rollouts.front();
  for (int r : cfg.sweep.rollouts) min_rollout = std::min(min_rollout, r);

  std::map<std::string, bool> baseline_done;
  std::string cal_csv = "# dtii-calibration v1\n# config_hash=" + cfg.hash() +
                        "\ncheckpoint,objective,alpha,mean_iter0,mean_itern,accepted,chosen,obj_scale\n";
  for (const auto& [ck_path, objective] : out.plan.calibrations) {
    const std::string stem = fs::path(ck_path).stem().string();
    try {
      const auto ck = io::load_checkpoint(ck_path, cfg.model);
      if (!baseline_done[ck_path]) {
        ii::IIConfig none = cfg.ii;
        none.objective = ii::Objective::None;
        out.results.push_back(
            cmd_eval(cfg, ck_path, none, (fs::path(cfg.out) / fmt::format("eval_{}_none.csv", stem)).string()));
        baseline_done[ck_path] = true;
      }
      ii::IIConfig base = cfg.ii;
      base.objective = objective;
      base.rollout = min_rollout;
      base.obj_scale = eval::calibrate_objective_scale(ck.wm, ck.ac, spec, base, cfg.sweep.calibration_seeds.front());
      auto cal = eval::calibrate_alpha(ck.wm, ck.ac, spec, base, cfg.sweep.alpha_grid, cfg.sweep.calibration_seeds);
      for (const auto& t : cal.trials)
        cal_csv += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{},{},{:.17g}\n", stem, ii::objective_name(objective),
                               t.alpha, t.mean_iter0, t.mean_itern, t.accepted ? 1 : 0, t.alpha == cal.alpha ? 1 : 0,
                               base.obj_scale);
      out.calibrations.push_back(cal);
      spdlog::info("{} {}: alpha {:g}, objective scale {:.4g}", stem, ii::objective_name(objective), cal.alpha,
                   base.obj_scale);
      for (const auto& cell : out.plan.cells) {
        if (cell.checkpoint != ck_path || cell.objective != objective) continue;
        ii::IIConfig arm = base;
        arm.rollout = cell.rollout;
        arm.alpha = cal.alpha;
        const auto file =
            (fs::path(cfg.out) / fmt::format("eval_{}_{}_lam{}.csv", stem, lower_name(objective), cell.rollout))
                .string();
        try {
          out.results.push_back(cmd_eval(cfg, ck_path, arm, file));
        } catch (const std::exception& e) {
          spdlog::error("cell {} failed: {}", file, e.what());
          out.failures.push_back(file);
        }
      }
    } catch (const std::exception& e) {
      spdlog::error("sweep on {} ({}) failed: {}", ck_path, ii::objective_name(objective), e.what());
      out.failures.push_back(ck_path + ":" + ii::objective_name(objective));
    }
  }
  io::write_file((fs::path(cfg.out) / "calibration.csv").string(), cal_csv);
  return out;
}

}  // namespace dtii::app
