#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nexus/date.hpp"

namespace nexus {

struct SeriesPoint {
  Date date;
  double value = 0.0;
};

/// Univariate history of one entity. Dates strictly increase; values are finite.
struct TimeSeries {
  std::string entity_id;
  Frequency frequency = Frequency::Weekly;
  std::vector<SeriesPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Eigen::VectorXd values() const;
  /// Throws BadSpec when ordering or finiteness is violated.
  void validate() const;
};

struct EventEntry {
  Date date;
  std::string text;
};

struct EventStream {
  std::vector<EventEntry> entries;

  bool empty() const { return entries.empty(); }
  /// Text attached to `date`, empty when none.
  const std::string* find(Date date) const;
};

enum class Setting { NumericalOnly, Multimodal };

std::string_view to_string(Setting setting);
std::optional<Setting> parse_setting(std::string_view text);

/// Numeric history with optional per-step text. The numerical-only setting leaves `events` empty.
struct MultimodalContext {
  TimeSeries series;
  std::optional<EventStream> events;
  std::string target_name;
  std::string domain_label;

  /// Throws BadSpec when an event date is not one of the series dates.
  void validate() const;
};

/// One exchange with a language model, as recorded in a run trace.
struct Exchange {
  std::string stage;
  std::string template_id;
  std::string backend_id;
  std::string model_id;
  std::string cache_key;
  std::string system_prompt;
  std::string user_prompt;
  std::string response;
  bool repair = false;
};

struct ForecastResult {
  std::vector<double> values;
  std::string reasoning;
  std::vector<Exchange> trace;
};

}  // namespace nexus
