#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nexus/types.hpp"

namespace nexus {

/// RFC-4180 reader. Quoted fields may span lines and contain `""` escapes.
/// Every record must have exactly the header's field count.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line on which each row starts.
  std::vector<int> row_lines;
};

CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>");

/// Reads a `date,value` CSV. Output is sorted by date.
TimeSeries load_series(const std::filesystem::path& path, const std::string& entity_id);
TimeSeries parse_series_csv(std::string_view text, const std::string& entity_id, const std::string& source = "<csv>");

/// Reads a `date,text` CSV. Entries falling in the same ISO week are merged (texts joined by newline).
EventStream load_events(const std::filesystem::path& path);
EventStream parse_events_csv(std::string_view text, const std::string& source = "<csv>");

/// Attaches each event to the series point whose week (the 7 days ending at the point's date) contains it.
/// Events outside every week are dropped; several events on one point are joined by newline.
EventStream align_events(const TimeSeries& series, const EventStream& events);

struct ForecastTask {
  std::string dataset;
  std::string entity_id;
  /// Context truncated to `context_length` points ending at `origin_index`.
  MultimodalContext context;
  /// Position of the last observed point in the full entity history.
  int origin_index = 0;
  int horizon = 1;
  Frequency frequency = Frequency::Weekly;
  int context_length = 1;
  Setting setting = Setting::Multimodal;
  /// Ground truth beyond the origin; empty for live forecasting.
  std::vector<SeriesPoint> truth;
  /// Event texts inside the forecast window (multimodal ground truth).
  std::vector<EventEntry> truth_events;

  Date last_context_date() const { return context.series.points.back().date; }
  std::vector<Date> future_dates() const;
  std::vector<double> truth_values() const;
};

/// Builds a task whose context is the `context_length` points ending at `origin_index` of `full`.
/// Truth covers the following `horizon` points when they exist.
ForecastTask make_task(const MultimodalContext& full, int origin_index, int horizon, int context_length,
                       Setting setting);

/// Rolling-origin tasks with the given stride whose forecast steps all fall in [eval_start, eval_end].
/// With stride 1 the count is W - horizon + 1 where W is the number of points in the window.
std::vector<ForecastTask> make_tasks(const MultimodalContext& full, Date eval_start, Date eval_end, int horizon,
                                     int context_length, int stride = 1, Setting setting = Setting::Multimodal);

struct EvalConfig {
  std::vector<int> horizons;
  int context_length = 1;
  int stride = 1;

  void validate() const;
  /// Horizons 4/8/13 with three years of weekly context.
  static EvalConfig zillow();
  /// Horizons 6/13/26 with one year of weekly context.
  static EvalConfig stocks();
};

struct BasicFeatures {
  int count = 0;
  Date first_date;
  Date last_date;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  double last_value = 0.0;
  double trend_slope = 0.0;
  int top_autocorr_lag = 2;
  double recent_change_4step = 0.0;
};

BasicFeatures ts_features(const TimeSeries& series);

/// Sample autocorrelation at `lag` (mean-removed, normalized by the lag-0 sum of squares).
double autocorrelation(const Eigen::VectorXd& values, int lag);

/// Bullet list used for the context agent's time series feature block.
std::string render_features(const BasicFeatures& features);

struct SynthSpec {
  double trend = 0.5;
  int seasonal_period = 0;
  double seasonal_amplitude = 10.0;
  double noise_sd = 1.0;
  int length = 64;
  double event_rate = 0.1;
  double base_level = 100.0;
  Date start_date{2022, 1, 7};
  std::string entity_id = "synthetic";
  std::string target_name = "Synthetic Target";
  std::string domain_label = "Synthetic Market";
};

/// Deterministic fixture generator: trend + optional sinusoidal season + Gaussian noise + event-driven shocks.
MultimodalContext synth_context(const SynthSpec& spec, std::uint64_t seed);

/// Forecasts of an external model keyed by origin date: `origin_date,step,value`.
std::map<Date, std::vector<double>> load_external_forecasts(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace nexus
