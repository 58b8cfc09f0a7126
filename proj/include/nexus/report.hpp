#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace nexus {

struct CellKey {
  std::string dataset;
  std::string setting;
  std::string method;
  /// Empty for the per-method Average row.
  std::optional<int> horizon;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellMetrics {
  double mape = 0.0;
  double rmse = 0.0;
  /// Number of forecast tasks pooled into the cell.
  int sample_count = 0;
};

/// Forecast of one task under one method, paired with its realized values.
struct ScoredForecast {
  std::string dataset;
  std::string setting;
  std::string method;
  int horizon = 0;
  std::vector<double> actual;
  std::vector<double> predicted;
};

enum class AverageMode {
  /// Average row = mean of per-horizon metrics weighted by task counts.
  SampleWeighted,
  /// Average row = plain mean of per-horizon metrics.
  Unweighted,
};

struct MetricReport {
  std::map<CellKey, CellMetrics> rows;

  const CellMetrics* find(const CellKey& key) const;
  std::vector<std::string> datasets() const;
  std::vector<std::string> settings() const;
};

/// Pools all (actual, predicted) pairs per (dataset, setting, horizon, method) and appends Average rows.
MetricReport aggregate(const std::vector<ScoredForecast>& results, AverageMode mode = AverageMode::SampleWeighted);

nlohmann::json to_json(const MetricReport& report);

struct ComparisonSpec {
  std::string baseline = "cot";
  std::string treatment = "nexus";
};

/// One table per setting: horizons as rows, (dataset, method) pairs as MAPE/RMSE column groups.
/// Average cells of the treatment carry the relative improvement over the baseline.
std::string to_markdown(const MetricReport& report, const ComparisonSpec& comparison = {});

}  // namespace nexus
