#include "nexus/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "nexus/error.hpp"
#include "nexus/metrics.hpp"

namespace nexus {

const CellMetrics* MetricReport::find(const CellKey& key) const {
  auto it = rows.find(key);
  return it == rows.end() ? nullptr : &it->second;
}

std::vector<std::string> MetricReport::datasets() const {
  std::set<std::string> out;
  for (const auto& [key, _] : rows) out.insert(key.dataset);
  return {out.begin(), out.end()};
}

std::vector<std::string> MetricReport::settings() const {
  std::set<std::string> out;
  for (const auto& [key, _] : rows) out.insert(key.setting);
  return {out.begin(), out.end()};
}

MetricReport aggregate(const std::vector<ScoredForecast>& results, AverageMode mode) {
  if (results.empty()) throw Error(ErrorKind::EmptyInput, "no forecasts to aggregate");

  struct Pool {
    std::vector<double> actual;
    std::vector<double> predicted;
    int tasks = 0;
  };
  std::map<CellKey, Pool> pools;
  for (const auto& r : results) {
    if (r.actual.size() != r.predicted.size() || r.actual.empty()) {
      throw Error(ErrorKind::LengthMismatch, fmt::format("forecast for {}/{} has {} actuals and {} predictions",
                                                         r.dataset, r.method, r.actual.size(), r.predicted.size()));
    }
    auto& pool = pools[CellKey{r.dataset, r.setting, r.method, r.horizon}];
    pool.actual.insert(pool.actual.end(), r.actual.begin(), r.actual.end());
    pool.predicted.insert(pool.predicted.end(), r.predicted.begin(), r.predicted.end());
    ++pool.tasks;
  }

  MetricReport report;
  struct Running {
    double mape = 0.0, rmse = 0.0, weight = 0.0;
    int tasks = 0;
  };
  std::map<CellKey, Running> averages;
  for (const auto& [key, pool] : pools) {
    const CellMetrics cell{mape(pool.actual, pool.predicted), rmse(pool.actual, pool.predicted), pool.tasks};
    report.rows.emplace(key, cell);
    auto& avg = averages[CellKey{key.dataset, key.setting, key.method, std::nullopt}];
    const double w = mode == AverageMode::SampleWeighted ? static_cast<double>(cell.sample_count) : 1.0;
    avg.mape += w * cell.mape;
    avg.rmse += w * cell.rmse;
    avg.weight += w;
    avg.tasks += cell.sample_count;
  }
  for (const auto& [key, avg] : averages) {
    report.rows.emplace(key, CellMetrics{avg.mape / avg.weight, avg.rmse / avg.weight, avg.tasks});
  }
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, cell] : report.rows) {
    nlohmann::json row{{"dataset", key.dataset},
                       {"setting", key.setting},
                       {"method", key.method},
                       {"mape", cell.mape},
                       {"rmse", cell.rmse},
                       {"sample_count", cell.sample_count}};
    row["horizon"] = key.horizon ? nlohmann::json(*key.horizon) : nlohmann::json("Average");
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"rows", std::move(rows)}};
}

namespace {

std::vector<std::string> ordered_methods(const MetricReport& report, const std::string& dataset,
                                         const std::string& setting, const ComparisonSpec& comparison) {
  std::set<std::string> found;
  for (const auto& [key, _] : report.rows) {
    if (key.dataset == dataset && key.setting == setting) found.insert(key.method);
  }
  std::vector<std::string> out;
  for (const auto& m : found) {
    if (m != comparison.baseline && m != comparison.treatment) out.push_back(m);
  }
  if (found.contains(comparison.baseline)) out.push_back(comparison.baseline);
  if (found.contains(comparison.treatment)) out.push_back(comparison.treatment);
  return out;
}

std::vector<int> horizons_of(const MetricReport& report, const std::string& dataset, const std::string& setting) {
  std::set<int> found;
  for (const auto& [key, _] : report.rows) {
    if (key.dataset == dataset && key.setting == setting && key.horizon) found.insert(*key.horizon);
  }
  return {found.begin(), found.end()};
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::string rank_name(std::size_t rank, std::size_t count) {
  if (count == 3) {
    static constexpr const char* kNames[] = {"Short", "Medium", "Long"};
    return kNames[rank];
  }
  return fmt::format("H{}", rank + 1);
}

}  // namespace

std::string to_markdown(const MetricReport& report, const ComparisonSpec& comparison) {
  std::string out;
  for (const auto& setting : report.settings()) {
    std::vector<std::string> datasets;
    for (const auto& d : report.datasets()) {
      if (!horizons_of(report, d, setting).empty()) datasets.push_back(d);
    }
    if (datasets.empty()) continue;

    out += fmt::format("### Setting: {}\n\n", setting);
    std::string header = "| Horizon |";
    std::string rule = "|---|";
    std::vector<std::pair<std::string, std::vector<std::string>>> columns;
    std::size_t rank_count = 0;
    for (const auto& d : datasets) {
      auto methods = ordered_methods(report, d, setting, comparison);
      for (const auto& m : methods) {
        header += fmt::format(" {} {} MAPE | {} {} RMSE |", d, m, d, m);
        rule += "---:|---:|";
      }
      columns.emplace_back(d, std::move(methods));
      rank_count = std::max(rank_count, horizons_of(report, d, setting).size());
    }
    out += header + "\n" + rule + "\n";

    for (std::size_t rank = 0; rank < rank_count; ++rank) {
      std::vector<std::string> parts;
      for (const auto& d : datasets) {
        auto hs = horizons_of(report, d, setting);
        if (rank < hs.size()) parts.push_back(fmt::format("{}={}", d, hs[rank]));
      }
      std::string line = fmt::format("| {} ({}) |", rank_name(rank, rank_count), fmt::join(parts, ", "));
      for (const auto& [d, methods] : columns) {
        auto hs = horizons_of(report, d, setting);
        for (const auto& m : methods) {
          const CellMetrics* cell =
              rank < hs.size() ? report.find(CellKey{d, setting, m, hs[rank]}) : nullptr;
          if (cell) {
            line += fmt::format(" {} | {} |", format_metric(cell->mape), format_metric(cell->rmse));
          } else {
            line += " - | - |";
          }
        }
      }
      out += line + "\n";
    }

    std::string avg_line = "| **Average** |";
    for (const auto& [d, methods] : columns) {
      const CellMetrics* base = report.find(CellKey{d, setting, comparison.baseline, std::nullopt});
      for (const auto& m : methods) {
        const CellMetrics* cell = report.find(CellKey{d, setting, m, std::nullopt});
        if (!cell) {
          avg_line += " - | - |";
          continue;
        }
        std::string mape_text = format_metric(cell->mape);
        std::string rmse_text = format_metric(cell->rmse);
        if (m == comparison.treatment && base && round4(base->mape) > 0.0 && round4(base->rmse) > 0.0) {
          // Improvements are computed from the displayed (rounded) cells so the table is self-consistent.
          mape_text += " (" + format_improvement(relative_improvement(round4(base->mape), round4(cell->mape))) + ")";
          rmse_text += " (" + format_improvement(relative_improvement(round4(base->rmse), round4(cell->rmse))) + ")";
        }
        avg_line += fmt::format(" {} | {} |", mape_text, rmse_text);
      }
    }
    out += avg_line + "\n\n";
  }
  return out;
}

}  // namespace nexus
