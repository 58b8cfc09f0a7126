// nexus: multi-agent forecasting pipeline, baseline, evaluation and judging.
//
//   nexus synth    --out fixtures/demo --seed 7
//   nexus forecast --config fixtures/demo/demo.toml --out runs/nexus
//   nexus baseline --config fixtures/demo/demo.toml --out runs/cot
//   nexus evaluate --run runs/nexus --run runs/cot --out reports
//   nexus judge    --config fixtures/demo/demo.toml --treatment runs/nexus --baseline runs/cot --out judge
//
// Exit codes: 0 ok, 1 config, 2 data, 3 backend, 4 parse.

#include <iostream>

#include <CLI11.hpp>

#include "nexus/commands.hpp"
#include "nexus/config.hpp"
#include "nexus/error.hpp"

namespace {

struct Common {
  std::string config;
  std::string backend;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool disable_macro = false;
  bool disable_micro = false;
  bool disable_calibration = false;
  std::string setting;
};

void add_common(CLI::App* cmd, Common& c, bool ablations) {
  cmd->add_option("--config", c.config, "Run configuration file")->required();
  cmd->add_option("--backend", c.backend, "Backend for every agent: mock, scripted:<path> or http[:<url>]");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Seed recorded in the run manifest");
  cmd->add_option("--workers", c.workers, "Concurrent tasks")->check(CLI::PositiveNumber);
  cmd->add_option("--setting", c.setting, "multimodal, numerical_only, or both comma-separated");
  if (ablations) {
    cmd->add_flag("--disable-macro", c.disable_macro, "Run without the macro agent");
    cmd->add_flag("--disable-micro", c.disable_micro, "Run without the micro agent");
    cmd->add_flag("--disable-calibration", c.disable_calibration, "Skip backtest calibration");
  }
}

nexus::RunConfig resolve(const Common& c) {
  nexus::RunConfig cfg = nexus::load_config(c.config);
  if (!c.backend.empty()) {
    cfg.llm.backend = c.backend;
    for (auto& [id, a] : cfg.agents) a.backend = c.backend;
  }
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  if (!c.setting.empty()) {
    cfg.settings.clear();
    std::string rest = c.setting;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto name = rest.substr(0, comma);
      auto s = nexus::parse_setting(name);
      if (!s) throw nexus::Error(nexus::ErrorKind::Config, "unknown setting '" + name + "'");
      cfg.settings.push_back(*s);
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
  }
  cfg.disable_macro = cfg.disable_macro || c.disable_macro;
  cfg.disable_micro = cfg.disable_micro || c.disable_micro;
  cfg.disable_calibration = cfg.disable_calibration || c.disable_calibration;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent time-series forecasting with language models"};
  app.require_subcommand(1);

  Common forecast_opts, baseline_opts, judge_common;
  auto* forecast = app.add_subcommand("forecast", "Calibrate and forecast with the agent pipeline");
  add_common(forecast, forecast_opts, true);
  auto* baseline = app.add_subcommand("baseline", "Forecast with the chain-of-thought baseline");
  add_common(baseline, baseline_opts, false);

  nexus::EvaluateOptions eval_opts;
  std::vector<std::string> eval_runs, eval_external;
  std::string eval_out;
  bool unweighted = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score runs against ground truth");
  evaluate->add_option("--run", eval_runs, "Run directory (repeatable)")->required();
  evaluate->add_option("--external", eval_external, "External forecasts as <method>=<dir> (repeatable)");
  evaluate->add_option("--out", eval_out, "Report directory")->required();
  evaluate->add_option("--baseline-method", eval_opts.comparison.baseline, "Method the improvement is measured against");
  evaluate->add_option("--treatment-method", eval_opts.comparison.treatment, "Method whose improvement is reported");
  evaluate->add_flag("--unweighted-average", unweighted, "Average rows as the plain mean of horizons");

  std::string judge_config, judge_backend, judge_model, judge_treatment, judge_baseline, judge_out;
  std::optional<std::uint64_t> judge_seed;
  std::optional<int> judge_sample, judge_workers;
  auto* judge = app.add_subcommand("judge", "Pairwise reasoning comparison of two runs");
  judge->add_option("--config", judge_config, "Run configuration file ([judge] section)")->required();
  judge->add_option("--backend", judge_backend, "Judge backend: mock, scripted:<path> or http[:<url>]");
  judge->add_option("--model", judge_model, "Judge model id");
  judge->add_option("--treatment", judge_treatment, "Run directory of the method under test")->required();
  judge->add_option("--baseline", judge_baseline, "Run directory of the baseline")->required();
  judge->add_option("--out", judge_out, "Output directory")->required();
  judge->add_option("--seed", judge_seed, "Seed for position assignment and sampling");
  judge->add_option("--sample", judge_sample, "Judge a random subset of this many tasks")->check(CLI::PositiveNumber);
  judge->add_option("--workers", judge_workers, "Concurrent judge calls")->check(CLI::PositiveNumber);

  nexus::SynthOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with a ready-to-run config");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_opts.seed, "Generator seed");
  synth->add_option("--entities", synth_opts.entities, "Number of series")->check(CLI::PositiveNumber);
  synth->add_option("--length", synth_opts.length, "Points per series");
  synth->add_option("--context-length", synth_opts.context_length, "Context window");
  synth->add_option("--horizons", synth_opts.horizons, "Forecast horizons");
  synth->add_option("--eval-points", synth_opts.eval_points, "Points in the evaluation window");
  synth->add_option("--event-rate", synth_opts.event_rate, "Probability of an event per step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*forecast) {
      nexus::cmd_forecast(resolve(forecast_opts));
    } else if (*baseline) {
      nexus::cmd_baseline(resolve(baseline_opts));
    } else if (*evaluate) {
      for (const auto& r : eval_runs) eval_opts.run_dirs.emplace_back(r);
      for (const auto& e : eval_external) {
        const auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw nexus::Error(nexus::ErrorKind::Config, "--external expects <method>=<dir>, got '" + e + "'");
        }
        eval_opts.external.push_back({e.substr(0, eq), e.substr(eq + 1)});
      }
      eval_opts.out_dir = eval_out;
      if (unweighted) eval_opts.average = nexus::AverageMode::Unweighted;
      nexus::cmd_evaluate(eval_opts);
    } else if (*judge) {
      nexus::RunConfig cfg = nexus::load_config(judge_config);
      if (!judge_backend.empty()) cfg.judge.backend = judge_backend;
      if (!judge_model.empty()) cfg.judge.model = judge_model;
      nexus::JudgeOptions opts;
      opts.treatment_dir = judge_treatment;
      opts.baseline_dir = judge_baseline;
      opts.out_dir = judge_out;
      opts.judge = nexus::make_judge_binding(cfg);
      opts.seed = judge_seed.value_or(cfg.seed);
      opts.sample = judge_sample;
      opts.workers = judge_workers.value_or(cfg.workers);
      nexus::cmd_judge(opts);
    } else if (*synth) {
      synth_opts.out_dir = synth_out;
      nexus::cmd_synth(synth_opts);
    }
  } catch (const nexus::Error& e) {
    std::cerr << "nexus: " << nexus::to_string(e.kind()) << ": " << e.what() << '\n';
    return nexus::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nexus: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
