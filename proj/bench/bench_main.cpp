#include <benchmark/benchmark.h>
#include <omp.h>

#include "dtii/core/kernels.hpp"
#include "dtii/eval/harness.hpp"

using namespace dtii;

namespace {

std::vector<float> filled(std::size_t n, std::uint64_t seed) {
  core::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

struct Gemm {
  int m, n, k;
  std::vector<float> a, b, c;
  explicit Gemm(const benchmark::State& s)
      : m(static_cast<int>(s.range(0))), n(static_cast<int>(s.range(1))), k(static_cast<int>(s.range(2))),
        a(filled(static_cast<std::size_t>(m) * k, 1)), b(filled(static_cast<std::size_t>(k) * n, 2)),
        c(static_cast<std::size_t>(m) * n) {}
  void flops(benchmark::State& s) const {
    s.counters["GFLOP/s"] = benchmark::Counter(2.0 * m * n * k * static_cast<double>(s.iterations()),
                                               benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
  }
};

void BM_gemm_nn_serial(benchmark::State& s) {
  Gemm g(s);
  for (auto _ : s) {
    kernels::serial::gemm_nn(g.m, g.n, g.k, g.a.data(), g.b.data(), g.c.data(), false);
    benchmark::DoNotOptimize(g.c.data());
  }
  g.flops(s);
}

void BM_gemm_nn_omp(benchmark::State& s) {
  Gemm g(s);
  for (auto _ : s) {
    kernels::gemm_nn(g.m, g.n, g.k, g.a.data(), g.b.data(), g.c.data(), false);
    benchmark::DoNotOptimize(g.c.data());
  }
  g.flops(s);
}

void BM_gemm_tn_serial(benchmark::State& s) {
  Gemm g(s);
  std::vector<float> grad = filled(static_cast<std::size_t>(g.m) * g.n, 3);
  std::vector<float> out(static_cast<std::size_t>(g.k) * g.n);
  for (auto _ : s) {
    kernels::serial::gemm_tn(g.m, g.n, g.k, g.a.data(), grad.data(), out.data(), false);
    benchmark::DoNotOptimize(out.data());
  }
  g.flops(s);
}

void BM_gemm_tn_omp(benchmark::State& s) {
  Gemm g(s);
  std::vector<float> grad = filled(static_cast<std::size_t>(g.m) * g.n, 3);
  std::vector<float> out(static_cast<std::size_t>(g.k) * g.n);
  for (auto _ : s) {
    kernels::gemm_tn(g.m, g.n, g.k, g.a.data(), grad.data(), out.data(), false);
    benchmark::DoNotOptimize(out.data());
  }
  g.flops(s);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({16, 192, 96});
  b->Args({256, 192, 96});
  b->Args({1024, 256, 256});
}

struct Agent {
  eval::EnvSpec spec;
  model::WorldModelParams wm;
  train::ActorCriticParams ac;
};

Agent agent() {
  Agent a;
  a.spec.task = env::Task::YMazePartial;
  a.spec.options.horizon = 50;
  model::WorldModelConfig c;
  c.obs_shape = env::make_environment(a.spec.task, a.spec.options)->observation_shape();
  c.deter = 64;
  c.units = 64;
  c.groups = 8;
  c.classes = 8;
  c.ensemble = 8;
  a.wm = model::WorldModelParams::init(c, 1);
  a.ac = train::ActorCriticParams::init(c, 2);
  return a;
}

// Episodes over a fixed seed list, with the thread count as the argument.
void BM_episodes(benchmark::State& s) {
  static const Agent a = agent();
  ii::IIConfig cfg;
  cfg.objective = ii::Objective::Sig;
  cfg.rollout = 1;
  cfg.iterations = 3;
  const auto seeds = eval::seed_range(1, 8);
  const int before = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(eval::run_episodes(a.wm, a.ac, a.spec, cfg, seeds));
  omp_set_num_threads(before);
}

void BM_refine_step(benchmark::State& s) {
  static const Agent a = agent();
  ii::IIConfig cfg;
  cfg.objective = static_cast<ii::Objective>(s.range(0));
  cfg.rollout = static_cast<int>(s.range(1));
  auto env = env::make_environment(a.spec.task, a.spec.options);
  const auto obs = env->reset(7);
  const core::ArrayF h0(core::Shape{1, a.wm.config.deter});
  core::Rng rng(3);
  for (auto _ : s) benchmark::DoNotOptimize(ii::refine(a.wm, a.ac, h0, obs, cfg, rng));
  s.SetLabel(ii::objective_name(cfg.objective));
}

}  // namespace

BENCHMARK(BM_gemm_nn_serial)->Apply(shapes);
BENCHMARK(BM_gemm_nn_omp)->Apply(shapes);
BENCHMARK(BM_gemm_tn_serial)->Apply(shapes);
BENCHMARK(BM_gemm_tn_omp)->Apply(shapes);
BENCHMARK(BM_episodes)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_refine_step)
    ->ArgsProduct({{0, 1, 2}, {1, 8}})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
