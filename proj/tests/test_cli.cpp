#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>

#include "app/commands.hpp"
#include "dtii/io/checkpoint.hpp"

using namespace dtii;
using namespace dtii::app;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"([run]
horizon = 25
seed = 3
[model]
deter = 16
groups = 4
classes = 4
units = 16
ensemble = 3
[train]
steps = 40
prefill = 100
checkpoint_every = 20
batch = 4
seq_len = 8
imag_horizon = 5
imag_starts = 8
[ii]
iterations = 2
samples = 2
[eval]
seeds = 1..3
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / fmt::format("dtii_test_{}_{}", tag, ::getpid());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

RunConfig tiny(const std::string& out, const std::string& extra = "") {
  auto cfg = parse_config(std::string(kTiny) + extra);
  cfg.out = out;
  cfg.finalize();
  return cfg;
}

std::vector<std::string> files_in(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DTII_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing, overrides and hash") {
  const auto cfg = parse_config(kTiny);
  CHECK(cfg.model.deter == 16);
  CHECK(cfg.schedule.checkpoint_every == 20);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.ii.objective == ii::Objective::Sig);

  auto again = parse_config(cfg.canonical());
  CHECK(again.canonical() == cfg.canonical());
  CHECK(again.hash() == cfg.hash());
  CHECK(cfg.hash().size() == 16);

  auto moved = cfg;
  moved.out = "elsewhere";
  CHECK(moved.hash() == cfg.hash());
  auto changed = cfg;
  changed.ii.alpha = 0.02;
  CHECK(changed.hash() != cfg.hash());

  CHECK_THROWS_AS(parse_config("[model]\ndeter = 16\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nosuch]\na = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\ndeter = sixteen\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[ii]\nobjective = bogus\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[ii]\nalpha = -1\n"), ConfigError);
}

TEST_CASE("seed lists and thresholds") {
  CHECK(parse_seed_range("5..7,11") == std::vector<std::uint64_t>{5, 6, 7, 11});
  CHECK(parse_seed_range("9") == std::vector<std::uint64_t>{9});
  CHECK_THROWS_AS(parse_seed_range("7..5"), ConfigError);
  CHECK_THROWS_AS(parse_seed_range(""), ConfigError);
  const auto t = parse_thresholds("-1,0.5,inf");
  REQUIRE(t.size() == 3);
  CHECK(t[1] == 0.5);
  CHECK(std::isinf(t[2]));
}

TEST_CASE("training budget zero writes only the initial checkpoint") {
  TempDir dir("zero");
  auto cfg = tiny(dir.path.string());
  cfg.schedule.wm_steps = 0;
  const auto out = cmd_train(cfg);
  CHECK(files_in(dir.path, ".wmck") == std::vector<std::string>{"ckpt_00000000.wmck"});
  CHECK(out.losses.empty());
}

TEST_CASE("checkpoint cadence includes the final partial interval") {
  TempDir dir("cadence");
  auto cfg = tiny(dir.path.string());
  cfg.schedule.wm_steps = 50;
  const auto out = cmd_train(cfg);
  CHECK(files_in(dir.path, ".wmck") == std::vector<std::string>{"ckpt_00000000.wmck", "ckpt_00000020.wmck",
                                                                 "ckpt_00000040.wmck", "ckpt_00000050.wmck"});
  CHECK(out.losses.size() == 50);
  for (double l : out.losses) CHECK(std::isfinite(l));
}

TEST_CASE("checkpoint round trip and corruption") {
  TempDir dir("ckpt");
  auto cfg = tiny(dir.path.string());
  cfg.schedule.wm_steps = 20;
  cmd_train(cfg);
  const auto path = dir / "ckpt_00000020.wmck";
  const auto bytes = io::read_file(path);
  const auto ck = io::decode_checkpoint(bytes, cfg.model);
  CHECK(ck.step == 20);
  CHECK(io::encode_checkpoint(ck) == bytes);

  auto flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x40);
  CHECK_THROWS_AS(io::decode_checkpoint(flipped), io::DataError);
  CHECK_THROWS_AS(io::decode_checkpoint(bytes.substr(0, bytes.size() - 9)), io::DataError);
  CHECK_THROWS_AS(io::decode_checkpoint("WMCK"), io::DataError);

  auto other = cfg.model;
  other.deter = 32;
  CHECK_THROWS_AS(io::decode_checkpoint(bytes, other), io::DataError);
}

TEST_CASE("resumed training matches an uninterrupted run") {
  TempDir a("resume_a");
  TempDir b("resume_b");
  auto cfg_a = tiny(a.path.string());
  auto cfg_b = tiny(b.path.string());
  cfg_a.schedule.wm_steps = 20;
  cmd_train(cfg_a);
  cfg_a.schedule.wm_steps = 50;
  const auto resumed = cmd_train(cfg_a, a / "train_state.bin");
  cfg_b.schedule.wm_steps = 50;
  const auto fresh = cmd_train(cfg_b);

  CHECK(resumed.losses == fresh.losses);
  CHECK(io::read_file(a / "loss.csv") == io::read_file(b / "loss.csv"));
  for (const auto* name : {"ckpt_00000040.wmck", "ckpt_00000050.wmck"})
    CHECK(io::read_file(a / name) == io::read_file(b / name));
}

TEST_CASE("results files round trip and reject foreign schemas") {
  TempDir dir("results");
  auto cfg = tiny(dir.path.string());
  cfg.schedule.wm_steps = 0;
  cmd_train(cfg);
  auto arm = cfg.ii;
  arm.rollout = 1;
  const auto file = cmd_eval(cfg, dir / "ckpt_00000000.wmck", arm, dir / "r.csv");
  const auto text = io::read_file(file);
  const auto parsed = parse_results(text);
  CHECK(parsed.meta.config_hash == cfg.hash());
  CHECK(parsed.meta.objective == ii::Objective::Sig);
  CHECK(parsed.meta.rollout == 1);
  REQUIRE(parsed.episodes.size() == 3);
  CHECK(parsed.episodes[0].length() == 25);
  CHECK(format_results(parsed) == text);

  std::string v2 = text;
  v2.replace(v2.find("v1"), 2, "v2");
  CHECK_THROWS_AS(parse_results(v2), io::DataError);
  std::string cols = text;
  cols.replace(cols.find("mse_pre"), 7, "mse_old");
  CHECK_THROWS_AS(parse_results(cols), io::DataError);
  CHECK_THROWS_AS(parse_results(text.substr(0, text.size() / 2)), io::DataError);
  CHECK_THROWS_AS(parse_results("hello\n"), io::DataError);
}

TEST_CASE("deterministic evaluation is byte-identical and self-comparison is null") {
  TempDir dir("determinism");
  auto cfg = tiny(dir.path.string());
  cfg.schedule.wm_steps = 20;
  cmd_train(cfg);
  const auto ck = dir / "ckpt_00000020.wmck";
  auto arm = cfg.ii;
  arm.objective = ii::Objective::Pig;
  arm.rollout = 1;
  const auto r1 = cmd_eval(cfg, ck, arm, dir / "a.csv");
  const auto r2 = cmd_eval(cfg, ck, arm, dir / "b.csv");
  CHECK(io::read_file(r1) == io::read_file(r2));

  const auto out = cmd_compare(r1, {r2}, {0.0, std::numeric_limits<double>::infinity()}, dir / "cmp");
  for (const auto& m : out.summary.metrics) {
    CHECK(m.mean_b - m.mean_a == 0.0);
    CHECK_FALSE(m.welch.significant());
  }
  CHECK(fs::exists(dir / "cmp/summary.csv"));
  CHECK(fs::exists(dir / "cmp/buckets.csv"));
}

TEST_CASE("sweep plan and empty grid") {
  SweepGrid g;
  g.checkpoints = {"a.wmck", "b.wmck"};
  g.objectives = {ii::Objective::Sig, ii::Objective::Pig, ii::Objective::Ent};
  g.rollouts = {0, 1, 2, 8};
  const auto plan = plan_sweep(g);
  CHECK(plan.cells.size() == 24);
  CHECK(plan.calibrations.size() == 6);

  g.objectives.push_back(ii::Objective::None);
  CHECK(plan_sweep(g).cells.size() == 24);

  TempDir dir("sweep");
  auto cfg = tiny((dir.path / "out").string());
  CHECK(plan_sweep(cfg.sweep).empty());
  const auto out = cmd_sweep(cfg);
  CHECK(out.results.empty());
  CHECK(out.failures.empty());
  CHECK_FALSE(fs::exists(dir.path / "out"));
}

TEST_CASE("sweep continues past a failing checkpoint") {
  TempDir dir("sweepfail");
  auto cfg = tiny(dir.path.string(), "[sweep]\nobjectives = ent\nrollouts = 0\ncalibration_seeds = 4\nalpha_grid = 0.01\n");
  cfg.schedule.wm_steps = 0;
  cmd_train(cfg);
  cfg.sweep.checkpoints = {dir / "missing.wmck", dir / "ckpt_00000000.wmck"};
  const auto out = cmd_sweep(cfg);
  CHECK(out.failures.size() == 1);
  CHECK(out.results.size() == 2);
  CHECK(fs::exists(dir / "calibration.csv"));
}

TEST_CASE("command line exit codes") {
  TempDir dir("exit");
  const auto ini = dir / "tiny.ini";
  io::write_file(ini, kTiny);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("eval --config " + ini) == 2);
  CHECK(run_cli("train --config " + dir / "missing.ini") == 2);
  CHECK(run_cli(fmt::format("train --config {} --steps 0 --out {}", ini, dir.path.string())) == 0);
  const auto ck = dir / "ckpt_00000000.wmck";
  CHECK(run_cli(fmt::format("eval --config {} --checkpoint {} --objective nope --out {}", ini, ck,
                            dir.path.string())) == 2);
  CHECK(run_cli(fmt::format("eval --config {} --checkpoint {} --objective ent --rollout-len 0 --out {}", ini, ck,
                            dir.path.string())) == 0);
  CHECK(fs::exists(dir / "eval_ENT_lam0.csv"));

  auto bytes = io::read_file(ck);
  bytes[bytes.size() - 1] = static_cast<char>(bytes.back() ^ 1);
  io::write_file(dir / "bad.wmck", bytes);
  CHECK(run_cli(fmt::format("eval --config {} --checkpoint {} --out {}", ini, dir / "bad.wmck",
                            dir.path.string())) == 3);
  io::write_file(dir / "bad.csv", "# dtii-results v9\n");
  CHECK(run_cli(fmt::format("compare --baseline {} --ii {}", dir / "bad.csv", dir / "eval_ENT_lam0.csv")) == 3);
}

TEST_CASE("shipped configuration files load") {
  const auto ref = load_config(std::string(DTII_SOURCE_DIR) + "/configs/reference.ini");
  auto defaults = default_config();
  defaults.finalize();
  CHECK(ref.model == defaults.model);
  CHECK(ref.schedule.wm_steps == defaults.schedule.wm_steps);
  CHECK(ref.seeds == defaults.seeds);
  CHECK(plan_sweep(ref.sweep).cells.size() == 24);
  CHECK(plan_sweep(ref.sweep).calibrations.size() == 6);
  const auto smoke = load_config(std::string(DTII_SOURCE_DIR) + "/configs/smoke.ini");
  CHECK(smoke.model.deter == 16);
}
