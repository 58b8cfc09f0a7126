// Acceptance checks: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>

#include "fuzz.hpp"
#include "nexus/commands.hpp"
#include "nexus/judge.hpp"
#include "nexus/metrics.hpp"
#include "nexus/report.hpp"
#include "support.hpp"

using namespace nexus;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string c1_metric_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> v(0.5, 1000.0);
  const auto t0 = Clock::now();
  for (int pair = 0; pair < 1000; ++pair) {
    const int n = 1 + static_cast<int>(rng() % 64);
    std::vector<double> a(n), p(n);
    for (int i = 0; i < n; ++i) a[i] = v(rng), p[i] = v(rng);
    double abs_pct = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      abs_pct += std::fabs(a[i] - p[i]) / std::fabs(a[i]);
      sq += (a[i] - p[i]) * (a[i] - p[i]);
    }
    const double m = abs_pct / n, r = std::sqrt(sq / n);
    if (std::fabs(mape(a, p) - m) > 1e-12 || std::fabs(rmse(a, p) - r) > 1e-12) {
      return "mismatch on pair " + std::to_string(pair);
    }
  }
  const double s = seconds_since(t0);
  return s < 1.0 ? "" : "took " + std::to_string(s) + " s";
}

std::string c2_improvements() {
  const struct {
    double base, treat;
    const char* want;
  } rows[] = {{0.0423, 0.0361, "↓14.7%"}, {63.1264, 53.4620, "↓15.3%"}, {0.2968, 0.0398, "↓86.6%"}, {506.1452, 57.8286, "↓88.6%"}};
  for (const auto& r : rows) {
    const auto got = format_improvement(relative_improvement(r.base, r.treat));
    if (got != r.want) return std::string("expected ") + r.want + ", got " + got;
  }
  return "";
}

int tasks_per_entity(int window, int horizon, std::uint64_t seed) {
  const auto ctx = testing::synthetic(seed, 80);
  const auto& pts = ctx.series.points;
  const Date start = pts[pts.size() - window].date;
  return static_cast<int>(make_tasks(ctx, start, pts.back().date, horizon, 20).size());
}

std::string c3_windowing() {
  const struct {
    int window, entities, horizon, per_entity, total;
  } rows[] = {{37, 15, 4, 34, 510}, {37, 15, 8, 30, 450}, {37, 15, 13, 25, 375},
              {47, 7, 6, 42, 294},  {47, 7, 13, 35, 245}, {47, 7, 26, 22, 154}};
  for (const auto& r : rows) {
    int total = 0;
    for (int e = 0; e < r.entities; ++e) {
      const int n = tasks_per_entity(r.window, r.horizon, 100 + e);
      if (n != r.per_entity) return "W=" + std::to_string(r.window) + " h=" + std::to_string(r.horizon) + " gave " + std::to_string(n);
      total += n;
    }
    if (total != r.total) return "total " + std::to_string(total) + " != " + std::to_string(r.total);
  }
  return "";
}

std::string c4_prompts() {
  std::string out;
  for (const auto& m : testing::golden_mismatches()) out += (out.empty() ? "" : ", ") + m;
  return out;
}

std::string c5_parser_fuzz() {
  const auto t = testing::fuzz_parsers(2024, 20000);
  if (t.cases != 100000) return "ran " + std::to_string(t.cases) + " cases";
  return t.clean() ? "" : t.first_failure;
}

SynthOptions ten_task_fixture(const fs::path& out) {
  SynthOptions o;
  o.out_dir = out;
  o.seed = 11;
  o.entities = 2;
  o.eval_points = 8;
  o.horizons = {4};
  return o;
}

std::string c6_determinism() {
  testing::TempDir dir("accept_det");
  cmd_synth(ten_task_fixture(dir / "data"));
  RunConfig cfg = load_config(dir / "data" / "demo.toml");
  if (cfg.n != 6) return "fixture calibrates with n=" + std::to_string(cfg.n);
  const auto t0 = Clock::now();
  std::vector<std::map<std::string, std::string>> trees;
  int records = 0;
  for (int workers : {1, 8, 1}) {
    cfg.workers = workers;
    cfg.out_dir = dir / ("run" + std::to_string(trees.size()));
    cmd_forecast(cfg);
    trees.push_back(testing::tree_bytes(cfg.out_dir));
  }
  const double s = seconds_since(t0);
  for (const auto& [rel, _] : trees[0]) records += rel.find("task_") != std::string::npos;
  if (records != 10) return std::to_string(records) + " task records";
  if (trees[0] != trees[1] || trees[0] != trees[2]) return "run trees differ";
  return s < 5.0 ? "" : "took " + std::to_string(s) + " s";
}

std::string c7_gate() {
  const auto at = testing::gate_fixture(109.5);
  if (!at.guidelines.accepted) return "5.0% improvement rejected";
  const auto below = testing::gate_fixture(109.51);
  if (below.guidelines.accepted) return "4.9% improvement accepted";
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int i = 0; i < 100; ++i) {
    const double k = u(rng), imp = u(rng), more = imp + u(rng), lower_k = k * u(rng) * 2.0;
    const bool ok = gate(1.0, 1.0 - imp, k).accepted;
    if (ok != (imp >= k - 1e-12)) return "gate disagrees with its threshold";
    if (ok && !gate(1.0, 1.0 - more, k).accepted) return "larger improvement rejected";
    if (ok && lower_k <= k && !gate(1.0, 1.0 - imp, lower_k).accepted) return "smaller k rejected";
  }
  return "";
}

std::string c8_folds() {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(rng() % 10);
    const int h = 1 + static_cast<int>(rng() % 26);
    const int ctx = 1 + static_cast<int>(rng() % 120);
    const int length = ctx + n * h + static_cast<int>(rng() % 60);
    const auto bad = testing::splits_violation(length, n, h, ctx);
    if (!bad.empty()) return bad;
  }
  return "";
}

MethodVerdict uniform(const std::string& who) {
  MethodVerdict v{"nexus", "cot", {}, {}};
  for (Criterion c : kCriteria) v.winners[c] = who;
  return v;
}

std::string c9_judge() {
  const JudgeCandidate a{"nexus", "gen", "a", {1}}, b{"cot", "gen", "b", {1}};
  JudgeVerdict says_a;
  for (Criterion c : kCriteria) says_a.winner(c) = Winner::ModelA;
  int in_a = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto pair = assign_positions(a, b, "", seed);
    in_a += pair.model_a.method_id == "nexus";
    JudgePair flipped = pair;
    std::swap(flipped.model_a, flipped.model_b);
    const auto w1 = map_verdict(pair, says_a).winner(Criterion::OverallPreference);
    const auto w2 = map_verdict(flipped, says_a).winner(Criterion::OverallPreference);
    if (w1 == w2 || w1 != pair.model_a.method_id) return "swap does not invert the mapping";
  }
  const double freq = in_a / 1000.0;
  if (freq < 0.45 || freq > 0.55) return "A-position frequency " + std::to_string(freq);

  std::vector<TalliedVerdict> fixture;
  for (int i = 0; i < 971; ++i) fixture.push_back({"gemini / zillow", uniform("nexus")});
  for (int i = 0; i < 28; ++i) fixture.push_back({"gemini / zillow", uniform("cot")});
  fixture.push_back({"gemini / zillow", uniform("")});
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    MethodVerdict m{"nexus", "cot", {}, {}};
    const char* who[] = {"nexus", "cot", ""};
    for (Criterion c : kCriteria) m.winners[c] = who[rng() % 3];
    fixture.push_back({"col" + std::to_string(rng() % 5), m});
  }
  const auto table = tally(fixture, "nexus", "cot");
  const auto& row = table.at(Criterion::OverallPreference, "gemini / zillow");
  if (std::fabs(row.treatment_pct() - 97.1) > 1e-9 || std::fabs(row.baseline_pct() - 2.8) > 1e-9 ||
      std::fabs(row.tie_pct() - 0.1) > 1e-9) {
    return "97.1/2.8/0.1 fixture misreported";
  }
  for (const auto& [key, cell] : table.cells) {
    if (std::fabs(cell.treatment_pct() + cell.baseline_pct() + cell.tie_pct() - 100.0) > 0.1) return "row sum off 100%";
  }
  return "";
}

bool contains(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

/// Checks every record of a run against the sections its ablation should leave in the synthesizer prompt.
std::string check_ablation(const fs::path& dir, bool macro, bool micro, bool calibration) {
  int records = 0, calibration_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    calibration_files += name == "calibration.json";
    if (!name.starts_with("task_")) continue;
    ++records;
    const auto rec = nlohmann::json::parse(testing::slurp(e.path()));
    if (rec["values"].size() != rec["truth"].size()) return name + ": value count differs from truth";
    std::string prompt;
    for (const auto& x : rec["trace"])
      if (x["stage"] == "synthesis") prompt = x["user_prompt"];
    if (prompt.empty()) return name + ": no synthesis exchange";
    if (rec["macro"].is_null() == macro) return name + ": macro record presence wrong";
    if (rec["micro"].is_null() == micro) return name + ": micro record presence wrong";
    if (macro && !contains(prompt, rec["macro"]["narrative"].get<std::string>())) return name + ": macro narrative missing";
    if (contains(prompt, "Movement: ") != micro) return name + ": micro steps section wrong";
    if (contains(prompt, kNotAvailable) == (macro && micro)) return name + ": not-available marker wrong";
    const bool guided = !rec["guidelines"].is_null();
    if (!calibration && guided) return name + ": guidelines without calibration";
    if (contains(prompt, kGuidelinesHeading) != guided) return name + ": guidelines section wrong";
  }
  if (records == 0) return "no records in " + dir.filename().string();
  if ((calibration_files > 0) != calibration) return "calibration files wrong in " + dir.filename().string();
  return "";
}

std::string c10_ablations() {
  testing::TempDir dir("accept_abl");
  cmd_synth(ten_task_fixture(dir / "data"));
  const RunConfig base = load_config(dir / "data" / "demo.toml");
  const struct {
    const char* name;
    bool macro, micro, calibration;
  } variants[] = {{"full", true, true, true},
                  {"no_micro", true, false, true},
                  {"no_macro", false, true, true},
                  {"no_calibration", true, true, false}};
  for (const auto& v : variants) {
    RunConfig cfg = base;
    cfg.out_dir = dir / v.name;
    cfg.disable_macro = !v.macro;
    cfg.disable_micro = !v.micro;
    cfg.disable_calibration = !v.calibration;
    cmd_forecast(cfg);
    const auto bad = check_ablation(cfg.out_dir, v.macro, v.micro, v.calibration);
    if (!bad.empty()) return std::string(v.name) + ": " + bad;
  }
  return "";
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<std::string()>> criteria[] = {
      {"metric oracle equivalence", c1_metric_oracle},
      {"relative improvement arithmetic", c2_improvements},
      {"rolling-origin task counts", c3_windowing},
      {"prompt byte fidelity", c4_prompts},
      {"parser totality under fuzzing", c5_parser_fuzz},
      {"end-to-end determinism", c6_determinism},
      {"calibration gate", c7_gate},
      {"fold geometry", c8_folds},
      {"judge de-randomization", c9_judge},
      {"ablation parity", c10_ablations},
  };
  int failed = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    std::string detail;
    try {
      detail = criteria[i].second();
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    const bool ok = detail.empty();
    failed += !ok;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << criteria[i].first;
    if (!ok) std::cout << " (" << detail << ")";
    std::cout << '\n';
  }
  return failed == 0 ? 0 : 1;
}
