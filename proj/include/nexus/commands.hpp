#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nexus/config.hpp"
#include "nexus/ingest.hpp"
#include "nexus/judge.hpp"
#include "nexus/report.hpp"

namespace nexus {

/// Loads every configured entity of a dataset with events aligned to the series weeks.
std::vector<MultimodalContext> load_dataset(const DatasetConfig& dataset);

/// History strictly before the evaluation window, used for calibration.
MultimodalContext pre_eval_history(const MultimodalContext& full, Date eval_start);

/// `<out>/<dataset>/<entity>/<horizon>/<setting>`.
std::filesystem::path cell_dir(const std::filesystem::path& out, const ForecastTask& task);

/// Run record of one task. Holds no timing, cache or path information so identical inputs give identical bytes.
nlohmann::json task_record(const ForecastTask& task, int task_index, const std::string& method,
                           const ForecastResult& result, const PipelineRun* run,
                           const std::optional<std::string>& guidelines);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Calibrates (unless disabled) and forecasts every task with the agent pipeline.
void cmd_forecast(const RunConfig& config);
/// Chain-of-thought baseline over the same tasks.
void cmd_baseline(const RunConfig& config);

struct ExternalForecasts {
  std::string method;
  /// `<dir>/<dataset>/<entity>/<horizon>/forecasts.csv` with columns origin_date,step,value.
  std::filesystem::path dir;
};

struct EvaluateOptions {
  std::vector<std::filesystem::path> run_dirs;
  std::vector<ExternalForecasts> external;
  std::filesystem::path out_dir;
  AverageMode average = AverageMode::SampleWeighted;
  ComparisonSpec comparison;
};

/// Scores every task record; writes report.json and report.md. Throws MissingRuns for a run without records.
MetricReport cmd_evaluate(const EvaluateOptions& options);

struct JudgeOptions {
  std::filesystem::path treatment_dir;
  std::filesystem::path baseline_dir;
  std::filesystem::path out_dir;
  AgentBinding judge;
  std::uint64_t seed = 0;
  /// Judge a seeded random subset of this many tasks; all tasks when absent.
  std::optional<int> sample;
  int workers = 1;
};

/// Pairwise judging of two runs over identical task sets; writes verdicts.json, tally.json and tally.md.
TallyTable cmd_judge(const JudgeOptions& options);

struct SynthOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int entities = 3;
  int length = 120;
  int context_length = 30;
  std::vector<int> horizons{4};
  /// Points in the evaluation window at the end of each series.
  int eval_points = 8;
  double event_rate = 0.15;
};

/// Writes synthetic series and events plus a ready-to-run config (`demo.toml`) and `script.json`.
void cmd_synth(const SynthOptions& options);

}  // namespace nexus
