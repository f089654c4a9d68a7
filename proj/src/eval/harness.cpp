#include "dtii/eval/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dtii::eval {

bool same_outcome(const StepRecord& a, const StepRecord& b) {
  return a.step == b.step && a.action == b.action && a.reward == b.reward && a.pre == b.pre && a.post == b.post &&
         a.flags == b.flags;
}

bool same_outcome(const EpisodeRecord& a, const EpisodeRecord& b) {
  if (a.seed != b.seed || a.score != b.score || a.flags != b.flags || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i)
    if (!same_outcome(a.steps[i], b.steps[i])) return false;
  return true;
}

double EpisodeRecord::mean_pre_mse() const {
  double s = 0;
  for (const auto& st : steps) s += st.pre.mse;
  return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
}

double EpisodeRecord::mean_post_mse() const {
  double s = 0;
  for (const auto& st : steps) s += st.post.mse;
  return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
}

double EpisodeRecord::immediate_impact() const { return mean_post_mse() - mean_pre_mse(); }

std::uint64_t refine_stream(std::uint64_t seed) { return core::Rng::derive(seed, 0x11); }

EpisodeRecord run_episode(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                          const IIConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EpisodeRecord rec;
  rec.seed = seed;
  rec.refined = !cfg.bypass();
  auto env = env::make_environment(spec.task, spec.options);
  if (env->observation_shape() != wm.config.obs_shape)
    throw core::ShapeError("environment observation " + core::shape_str(env->observation_shape()) +
                           " does not match the model " + core::shape_str(wm.config.obs_shape));
  core::Rng rng(refine_stream(seed));
  core::Rng unused(0);
  ArrayF obs = env->reset(seed);
  model::ModelState state = model::initial_state(wm.config);
  int prev_action = -1;
  while (!env->done()) {
    StepRecord st;
    st.step = env->steps_taken();
    try {
      auto out = model::observe_step(wm, state, model::action_onehot(prev_action, wm.config.actions), obs, unused,
                                     model::LatentSelect::Mode);
      st.pre = reconstruction_metrics(obs, model::decode(wm, out.state));
      if (cfg.bypass()) {
        state = out.state;
        st.action = train::actor_mode(ac, state);
        st.post = st.pre;
      } else {
        auto res = ii::refine(wm, ac, out.state.h, obs, cfg, rng);
        state = res.state;
        st.action = res.action;
        st.post = reconstruction_metrics(obs, model::decode(wm, state));
        const auto& it = res.trace.iterations;
        st.obj_iter0 = it.front().objective;
        st.obj_itern = it.back().objective;
        double g = 0;
        const std::size_t updates = it.size() > 1 ? it.size() - 1 : 0;
        for (std::size_t i = 0; i < updates; ++i) g += it[i].grad_norm;
        st.grad_norm_mean = updates ? g / static_cast<double>(updates) : 0.0;
        if (res.trace.nonfinite) st.flags |= kFlagNonFinite;
      }
      auto step = env->step(st.action);
      st.reward = step.reward;
      obs = std::move(step.observation);
      prev_action = st.action;
    } catch (const std::exception&) {
      st.flags |= kFlagError;
      rec.flags |= st.flags;
      rec.steps.push_back(st);
      break;
    }
    rec.flags |= st.flags;
    rec.score += st.reward;
    rec.steps.push_back(st);
  }
  return rec;
}

std::vector<EpisodeRecord> run_episodes(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                        const IIConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<EpisodeRecord> out(seeds.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    try {
      out[i] = run_episode(wm, ac, spec, cfg, seeds[i]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<double> random_policy_scores(const EnvSpec& spec, const std::vector<std::uint64_t>& seeds) {
  std::vector<double> scores;
  for (auto seed : seeds) {
    auto env = env::make_environment(spec.task, spec.options);
    env->reset(seed);
    core::Rng rng(core::Rng::derive(seed, 0x22));
    double score = 0;
    while (!env->done()) score += env->step(rng.below(env->action_count())).reward;
    scores.push_back(score);
  }
  return scores;
}

double heldout_reconstruction_mse(const WorldModelParams& wm, const EnvSpec& spec,
                                  const std::vector<std::uint64_t>& seeds) {
  double total = 0;
  std::size_t steps = 0;
  core::Rng unused(0);
  for (auto seed : seeds) {
    auto env = env::make_environment(spec.task, spec.options);
    ArrayF obs = env->reset(seed);
    core::Rng rng(core::Rng::derive(seed, 0x22));
    model::ModelState state = model::initial_state(wm.config);
    int prev_action = -1;
    while (!env->done()) {
      state = model::observe_step(wm, state, model::action_onehot(prev_action, wm.config.actions), obs, unused,
                                  model::LatentSelect::Mode)
                  .state;
      total += reconstruction_metrics(obs, model::decode(wm, state)).mse;
      ++steps;
      prev_action = rng.below(env->action_count());
      obs = env->step(prev_action).observation;
    }
  }
  return steps ? total / static_cast<double>(steps) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t last) {
  if (last < first) throw std::invalid_argument("seed range is empty");
  std::vector<std::uint64_t> out;
  for (auto s = first; s <= last; ++s) out.push_back(s);
  return out;
}

// Statistics ---------------------------------------------------------------

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

namespace {

double two_sided_p(double t, double df) {
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

}  // namespace

TestResult welch_test(const std::vector<double>& a, const std::vector<double>& b) {
  TestResult r;
  if (a.empty() || b.empty()) return r;
  r.mean_diff = mean_of(b) - mean_of(a);
  if (a.size() < 2 || b.size() < 2) return r;
  const double va = sd_of(a) * sd_of(a) / static_cast<double>(a.size());
  const double vb = sd_of(b) * sd_of(b) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (se2 <= 0) {
    r.valid = true;
    r.p = r.mean_diff == 0 ? 1.0 : 0.0;
    r.t = r.mean_diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.df = static_cast<double>(a.size() + b.size() - 2);
    return r;
  }
  r.t = r.mean_diff / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = two_sided_p(r.t, r.df);
  r.valid = true;
  return r;
}

TestResult paired_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired test needs equal-length samples");
  TestResult r;
  if (a.empty()) return r;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  r.mean_diff = mean_of(d);
  if (d.size() < 2) return r;
  r.df = static_cast<double>(d.size() - 1);
  const double se = sd_of(d) / std::sqrt(static_cast<double>(d.size()));
  r.valid = true;
  if (se <= 0) {
    r.p = r.mean_diff == 0 ? 1.0 : 0.0;
    r.t = r.mean_diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    return r;
  }
  r.t = r.mean_diff / se;
  r.p = two_sided_p(r.t, r.df);
  return r;
}

std::vector<std::string> metric_names() {
  return {"score",    "length",    "mse_pre",  "psnr_pre", "ssim_pre",
          "mse_post", "psnr_post", "ssim_post", "immediate_mse"};
}

namespace {

double step_metric(const StepRecord& s, const std::string& name) {
  if (name == "score") return s.reward;
  if (name == "length") return 1.0;
  if (name == "mse_pre") return s.pre.mse;
  if (name == "psnr_pre") return s.pre.psnr;
  if (name == "ssim_pre") return s.pre.ssim;
  if (name == "mse_post") return s.post.mse;
  if (name == "psnr_post") return s.post.psnr;
  if (name == "ssim_post") return s.post.ssim;
  if (name == "immediate_mse") return s.post.mse - s.pre.mse;
  throw std::invalid_argument("unknown metric " + name);
}

std::vector<double> per_step(const std::vector<EpisodeRecord>& eps, const std::string& name) {
  std::vector<double> out;
  for (const auto& e : eps)
    for (const auto& s : e.steps) out.push_back(step_metric(s, name));
  return out;
}

std::vector<double> per_episode(const std::vector<EpisodeRecord>& eps, const std::string& name) {
  std::vector<double> out;
  for (const auto& e : eps) out.push_back(episode_metric(e, name));
  return out;
}

bool seeds_match(const std::vector<EpisodeRecord>& a, const std::vector<EpisodeRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].seed != b[i].seed) return false;
  return true;
}

}  // namespace

double episode_metric(const EpisodeRecord& e, const std::string& name) {
  if (name == "score") return e.score;
  if (name == "length") return e.length();
  double s = 0;
  for (const auto& st : e.steps) s += step_metric(st, name);
  return e.steps.empty() ? 0.0 : s / static_cast<double>(e.steps.size());
}

const MetricComparison& ComparisonSummary::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw std::invalid_argument("no metric " + name + " in summary");
}

ComparisonSummary compare(const std::vector<EpisodeRecord>& a, const std::vector<EpisodeRecord>& b,
                          const std::vector<double>& thresholds) {
  ComparisonSummary out;
  out.episodes_a = a.size();
  out.episodes_b = b.size();
  out.paired = seeds_match(a, b);
  for (const auto& name : metric_names()) {
    MetricComparison m;
    m.name = name;
    const auto xa = per_episode(a, name), xb = per_episode(b, name);
    m.mean_a = mean_of(xa);
    m.sd_a = sd_of(xa);
    m.mean_b = mean_of(xb);
    m.sd_b = sd_of(xb);
    if (name != "score" && name != "length") {
      m.sd_steps_a = sd_of(per_step(a, name));
      m.sd_steps_b = sd_of(per_step(b, name));
    }
    m.welch = welch_test(xa, xb);
    if (out.paired) m.paired = paired_test(xa, xb);
    out.metrics.push_back(m);
  }
  if (out.paired && !thresholds.empty()) out.buckets = threshold_analysis(a, b, thresholds);
  return out;
}

std::vector<Bucket> threshold_analysis(const std::vector<EpisodeRecord>& baseline, const std::vector<EpisodeRecord>& ii,
                                       const std::vector<double>& thresholds) {
  if (!seeds_match(baseline, ii)) throw std::invalid_argument("threshold analysis needs matched seeds");
  std::vector<Bucket> out;
  for (double th : thresholds) {
    Bucket bk;
    bk.threshold = th;
    std::vector<double> xb, xi;
    for (std::size_t i = 0; i < baseline.size(); ++i)
      if (baseline[i].score <= th) {
        xb.push_back(baseline[i].score);
        xi.push_back(ii[i].score);
      }
    bk.count = xb.size();
    bk.fraction = baseline.empty() ? 0.0 : static_cast<double>(xb.size()) / static_cast<double>(baseline.size());
    if (!xb.empty()) {
      bk.mean_baseline = mean_of(xb);
      bk.mean_ii = mean_of(xi);
      bk.test = paired_test(xb, xi);
    }
    out.push_back(bk);
  }
  return out;
}

BestLambda best_lambda(double baseline_mean, const std::vector<LambdaResult>& results, bool higher_is_better) {
  BestLambda best{baseline_mean, -1};
  for (const auto& r : results) {
    if (!r.significant) continue;
    const bool improves = higher_is_better ? r.mean > best.value : r.mean < best.value;
    if (improves) best = {r.mean, r.lambda};
  }
  return best;
}

// Calibration --------------------------------------------------------------

std::vector<double> default_alpha_grid() { return {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}; }

AlphaCalibration calibrate_alpha(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                 const IIConfig& cfg, const std::vector<double>& grid,
                                 const std::vector<std::uint64_t>& seeds) {
  if (grid.empty()) throw std::invalid_argument("alpha grid is empty");
  if (cfg.bypass()) throw std::invalid_argument("calibration needs an objective");
  AlphaCalibration out;
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  out.alpha = sorted.front();
  for (double alpha : sorted) {
    IIConfig c = cfg;
    c.alpha = alpha;
    AlphaTrial trial;
    trial.alpha = alpha;
    std::vector<double> first, last;
    for (const auto& e : run_episodes(wm, ac, spec, c, seeds))
      for (const auto& s : e.steps) {
        first.push_back(s.obj_iter0);
        last.push_back(s.obj_itern);
      }
    trial.mean_iter0 = mean_of(first);
    trial.mean_itern = mean_of(last);
    trial.accepted = std::isfinite(trial.mean_itern) && trial.mean_itern <= trial.mean_iter0;
    if (trial.accepted) out.alpha = alpha;
    out.trials.push_back(trial);
  }
  return out;
}

double calibrate_objective_scale(const WorldModelParams& wm, const ActorCriticParams& ac, const EnvSpec& spec,
                                 const IIConfig& cfg, std::uint64_t seed) {
  if (cfg.bypass()) return 1.0;
  IIConfig probe = cfg;
  probe.iterations = 0;
  probe.obj_scale = 1.0;
  const auto rec = run_episode(wm, ac, spec, probe, seed);
  std::vector<double> vals;
  for (const auto& s : rec.steps) vals.push_back(std::fabs(s.obj_iter0));
  const double m = mean_of(vals);
  if (!std::isfinite(m) || m <= 1e-12) return 1.0;
  return std::max(cfg.reg_free_bits, 1e-3) / m;
}

}  // namespace dtii::eval
