#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "nexus/commands.hpp"
#include "nexus/config.hpp"
#include "support.hpp"

using namespace nexus;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

int nexus_cli(const std::string& args) {
  const std::string cmd = std::string(NEXUS_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// Small synthetic dataset: 2 entities, 3 tasks per cell.
fs::path make_fixture(const testing::TempDir& dir, std::uint64_t seed = 3) {
  SynthOptions o;
  o.out_dir = dir / "data";
  o.seed = seed;
  o.entities = 2;
  o.length = 80;
  o.eval_points = 6;
  cmd_synth(o);
  return o.out_dir / "demo.toml";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"(
# comment
[run]
out = "runs/x"
seed = 9
workers = 2
setting = ["multimodal", "numerical_only"]

[calibration]
n = 4
k = 0.1
support = "all"

[llm]
backend = "mock"
model = "m1"

[judge]
model = "j1"

[dataset:zillow]
entities = ["a", "b"]
series_dir = "series"
eval_start = "2024-01-05"
eval_end = "2024-06-28"
horizons = [4, 8]
context_length = 20
)",
                                "/base");
  CHECK(cfg.out_dir == fs::path("/base/runs/x"));
  CHECK(cfg.seed == 9u);
  CHECK(cfg.workers == 2);
  CHECK(cfg.settings.size() == 2u);
  CHECK(cfg.n == 4);
  CHECK(cfg.k == 0.1);
  CHECK(cfg.support == SupportRule::All);
  CHECK(cfg.llm.model == "m1");
  CHECK(cfg.judge.model == "j1");
  REQUIRE(cfg.datasets.size() == 1u);
  CHECK(cfg.datasets[0].name == "zillow");
  CHECK(cfg.datasets[0].entities == std::vector<std::string>{"a", "b"});
  CHECK(cfg.datasets[0].series_dir == fs::path("/base/series"));
  CHECK(cfg.datasets[0].horizons == std::vector<int>{4, 8});
  CHECK_NOTHROW(cfg.validate());

  CHECK(kind_of([] { parse_config("[calibration]\nk = 1.5\n").validate(); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config("[run]\nseed = abc\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { load_config("/nonexistent/nexus.toml"); }) == ErrorKind::Config);
  CHECK(kind_of([] { make_backend("carrier-pigeon", RunConfig{}); }) == ErrorKind::Config);
  CHECK(backend_id("scripted:/x") == "scripted");

  const auto per_agent = parse_config("[llm]\nmodel = \"a\"\n[agent:micro_agent]\nmodel = \"b\"\n");
  CHECK(per_agent.agent(TemplateId::MicroAgent).model == "b");
  CHECK(per_agent.agent(TemplateId::MacroAgent).model == "a");
  CHECK(kind_of([] { parse_config("[agent:nobody]\nmodel = \"x\"\n"); }) == ErrorKind::Config);
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli_exit");
  const auto cfg = make_fixture(dir);

  CHECK(nexus_cli("") == 1);
  CHECK(nexus_cli("forecast --config " + q(dir / "missing.toml") + " --out " + q(dir / "o")) == 1);
  CHECK(nexus_cli("forecast --config " + q(cfg) + " --out " + q(dir / "o") + " --setting sideways") == 1);

  testing::spit(dir / "nodata.toml", testing::slurp(cfg) + "\n[dataset:extra]\nentities = [\"ghost\"]\nseries_dir = \"nowhere\"\n"
                                                             "eval_start = \"2024-01-05\"\neval_end = \"2024-03-01\"\n"
                                                             "horizons = [4]\ncontext_length = 10\n");
  fs::copy(dir / "data" / "series", dir / "series");
  fs::copy(dir / "data" / "events", dir / "events");
  fs::copy_file(dir / "data" / "script.json", dir / "script.json");
  CHECK(nexus_cli("forecast --config " + q(dir / "nodata.toml") + " --out " + q(dir / "o") + " --disable-calibration") == 2);

  const std::string http = "env -u NEXUS_LLM_API_KEY " + std::string(NEXUS_BINARY) + " baseline --config " + q(cfg) +
                           " --out " + q(dir / "h") + " --backend http:http://127.0.0.1:9/v1 >/dev/null 2>&1";
  const int status = std::system(http.c_str());
  CHECK(WEXITSTATUS(status) == 3);

  testing::spit(dir / "junk" / "script.json", R"({"replies": ["no timeline here"], "cyclic": true})");
  CHECK(nexus_cli("forecast --config " + q(cfg) + " --out " + q(dir / "p") + " --disable-calibration --backend scripted:" +
                  q(dir / "junk")) == 4);

  CHECK(nexus_cli("evaluate --run " + q(dir / "nothing") + " --out " + q(dir / "r")) == 2);
}

TEST_CASE("full demo with ablation and reproducibility") {
  testing::TempDir dir("cli_demo");
  const auto cfg = make_fixture(dir);
  const auto a = dir / "a", b = dir / "b", cot = dir / "cot", plain = dir / "plain";

  REQUIRE(nexus_cli("forecast --config " + q(cfg) + " --out " + q(a) + " --seed 5 --workers 1") == 0);
  REQUIRE(nexus_cli("forecast --config " + q(cfg) + " --out " + q(b) + " --seed 5 --workers 4") == 0);
  CHECK(testing::tree_bytes(a) == testing::tree_bytes(b));

  bool saw_calibration = false;
  for (const auto& [rel, _] : testing::tree_bytes(a)) saw_calibration |= rel.ends_with("calibration.json");
  CHECK(saw_calibration);

  REQUIRE(nexus_cli("forecast --config " + q(cfg) + " --out " + q(plain) + " --disable-calibration") == 0);
  for (const auto& [rel, _] : testing::tree_bytes(plain)) CHECK_FALSE(rel.ends_with("calibration.json"));
  const auto manifest = nlohmann::json::parse(testing::slurp(plain / "run.json"));
  CHECK(manifest["ablations"]["disable_calibration"] == true);

  REQUIRE(nexus_cli("baseline --config " + q(cfg) + " --out " + q(cot)) == 0);
  REQUIRE(nexus_cli("evaluate --run " + q(a) + " --run " + q(cot) + " --out " + q(dir / "report")) == 0);
  const auto report = testing::slurp(dir / "report" / "report.md");
  CHECK(report.find("nexus") != std::string::npos);
  CHECK(fs::exists(dir / "report" / "report.json"));

  REQUIRE(nexus_cli("judge --config " + q(cfg) + " --treatment " + q(a) + " --baseline " + q(cot) + " --out " +
                    q(dir / "judge") + " --seed 1") == 0);
  const auto tally = testing::slurp(dir / "judge" / "tally.md");
  CHECK(tally.find("NEXUS Win") != std::string::npos);
  CHECK(tally.find("CoT Baseline Win") != std::string::npos);

  CHECK(nexus_cli("judge --config " + q(cfg) + " --treatment " + q(a) + " --baseline " + q(cot) + " --out " +
                  q(dir / "judge2") + " --model simulated-analyst") == 1);
}

TEST_CASE("judge refuses mismatched task sets") {
  testing::TempDir dir("cli_mismatch");
  const auto cfg = load_config(make_fixture(dir));
  RunConfig multi = cfg, numeric = cfg;
  multi.out_dir = dir / "multi";
  numeric.out_dir = dir / "numeric";
  numeric.settings = {Setting::NumericalOnly};
  cmd_baseline(multi);
  cmd_baseline(numeric);
  JudgeOptions o{multi.out_dir, numeric.out_dir, dir / "j", make_judge_binding(cfg), 0, std::nullopt, 1};
  CHECK(kind_of([&] { cmd_judge(o); }) == ErrorKind::TaskSetMismatch);

  EvaluateOptions e;
  e.run_dirs = {dir / "empty"};
  fs::create_directories(dir / "empty");
  CHECK(kind_of([&] { cmd_evaluate(e); }) == ErrorKind::MissingRuns);
}

TEST_CASE("replay cache serves a second run without new calls") {
  testing::TempDir dir("cli_cache");
  const auto cfg_path = make_fixture(dir);
  RunConfig cfg = load_config(cfg_path);
  cfg.cache_dir = dir / "cache";
  cfg.disable_calibration = true;
  cfg.out_dir = dir / "first";
  cmd_forecast(cfg);

  // An empty script raises ScriptExhausted on any call that misses the cache.
  testing::spit(dir / "empty" / "script.json", R"({"replies": []})");
  RunConfig again = cfg;
  again.llm.backend = "scripted:" + (dir / "empty").string();
  again.out_dir = dir / "second";
  CHECK_NOTHROW(cmd_forecast(again));
  CHECK(testing::tree_bytes(dir / "first") == testing::tree_bytes(dir / "second"));

  again.cache_dir.clear();
  again.out_dir = dir / "third";
  CHECK(kind_of([&] { cmd_forecast(again); }) == ErrorKind::ScriptExhausted);
}
