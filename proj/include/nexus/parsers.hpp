#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace nexus {

enum class ParseErrorKind {
  MissingTag,
  MalformedNumber,
  HorizonMismatch,
  NotJson,
  MissingKey,
  BadMovementLabel,
  BadWinnerString,
};

std::string_view to_string(ParseErrorKind kind);

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ParseError {
  ParseErrorKind kind;
  /// Tag name, key path, offending token, ...
  std::string detail;
  /// Offending bytes of the input.
  ByteSpan span;
  int expected = 0;
  int got = 0;

  std::string message() const;
};

/// Either a parsed value or a typed parse error. Parsers never throw.
template <typename T>
class ParseResult {
 public:
  ParseResult(T value) : state_(std::move(value)) {}
  ParseResult(ParseError error) : state_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(state_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(state_); }
  T&& value() && { return std::get<T>(std::move(state_)); }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }
  const ParseError& error() const { return std::get<ParseError>(state_); }

 private:
  std::variant<T, ParseError> state_;
};

struct TaggedForecast {
  std::string reasoning;
  std::vector<double> values;

  friend bool operator==(const TaggedForecast&, const TaggedForecast&) = default;
};

enum class Movement { Up, Down, Stable };

std::string_view to_string(Movement movement);

struct MicroStep {
  int timestamp = 0;
  std::string date;
  std::string day_info;
  Movement movement = Movement::Stable;
  std::string key_drivers;
  double adjusted_forecast_value = 0.0;

  friend bool operator==(const MicroStep&, const MicroStep&) = default;
};

struct MicroOutlook {
  std::vector<MicroStep> steps;

  std::vector<double> values() const;
  friend bool operator==(const MicroOutlook&, const MicroOutlook&) = default;
};

struct CalibrationCritique {
  std::string diagnosis;
  std::string guidelines;

  friend bool operator==(const CalibrationCritique&, const CalibrationCritique&) = default;
};

enum class Winner { ModelA, ModelB, Tie };

std::string_view to_string(Winner winner);

/// Criteria in the order of the judge schema.
enum class Criterion { DomainRelevance, EventRelevance, LogicToNumber, AnalyticalDepth, OverallPreference };

inline constexpr Criterion kCriteria[] = {Criterion::DomainRelevance, Criterion::EventRelevance,
                                          Criterion::LogicToNumber, Criterion::AnalyticalDepth,
                                          Criterion::OverallPreference};

/// Schema key, e.g. "domain_relevance_winner".
std::string_view schema_key(Criterion criterion);
/// Display name, e.g. "Domain Relevance".
std::string_view display_name(Criterion criterion);

struct JudgeVerdict {
  Winner domain_relevance = Winner::Tie;
  Winner event_relevance = Winner::Tie;
  Winner logic_to_number = Winner::Tie;
  Winner analytical_depth = Winner::Tie;
  Winner overall_preference = Winner::Tie;
  std::string justification;

  Winner winner(Criterion criterion) const;
  Winner& winner(Criterion criterion);
  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

struct TimelineEntry {
  std::string date;
  double value = 0.0;
  std::string content;

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

ParseResult<TaggedForecast> parse_tagged_forecast(std::string_view text, int horizon);
ParseResult<MicroOutlook> parse_micro_json(std::string_view text, int horizon);
ParseResult<std::vector<double>> parse_prediction_tag(std::string_view text, int horizon);
ParseResult<CalibrationCritique> parse_calibration(std::string_view text);
ParseResult<JudgeVerdict> parse_judge(std::string_view text);

/// Blocks of `Date/Timestamp:` / `Value:` / `Textual Content:` lines emitted by the context agent.
ParseResult<std::vector<TimelineEntry>> parse_timeline(std::string_view text);

/// `<guidelines>` block of a consolidation reply; an empty string means "NONE".
ParseResult<std::string> parse_consolidated_guidelines(std::string_view text);

/// Content of the first `<tag>...</tag>` block, with its span.
struct TagMatch {
  std::string_view content;
  ByteSpan span;
};
std::variant<TagMatch, ParseError> find_tag(std::string_view text, std::string_view tag);

/// Strict real: integer, decimal or scientific notation. NaN and infinities are rejected.
bool parse_real(std::string_view token, double& out);

// Serializers producing each grammar's canonical form.
std::string format_number(double value);
std::string format_value_list(const std::vector<double>& values);
std::string format_tagged_forecast(const TaggedForecast& forecast);
std::string format_micro_json(const MicroOutlook& outlook);
std::string format_prediction(const std::string& reasoning, const std::vector<double>& values);
std::string format_calibration(const CalibrationCritique& critique);
std::string format_judge(const JudgeVerdict& verdict);
std::string format_timeline(const std::vector<TimelineEntry>& entries);

}  // namespace nexus
