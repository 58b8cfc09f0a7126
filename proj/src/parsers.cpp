#include "nexus/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace nexus {

namespace {

using Json = nlohmann::json;

constexpr std::string_view kWhitespace = " \t\r\n";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(kWhitespace) - first + 1);
}

std::size_t offset_of(std::string_view whole, std::string_view part) {
  return static_cast<std::size_t>(part.data() - whole.data());
}

ParseError error(ParseErrorKind kind, std::string detail, ByteSpan span = {}) {
  return ParseError{kind, std::move(detail), span, 0, 0};
}

ParseError horizon_mismatch(int expected, int got, ByteSpan span = {}) {
  ParseError e{ParseErrorKind::HorizonMismatch, {}, span, expected, got};
  e.detail = fmt::format("expected {} values, got {}", expected, got);
  return e;
}

// Splits `body` on commas and parses every item as a strict real.
std::variant<std::vector<double>, ParseError> parse_number_list(std::string_view whole, std::string_view body) {
  std::vector<double> values;
  if (trim(body).empty()) return values;
  std::string_view rest = body;
  while (true) {
    const auto comma = rest.find(',');
    const std::string_view raw = rest.substr(0, comma);
    const std::string_view token = trim(raw);
    double v = 0.0;
    if (!parse_real(token, v)) {
      const std::size_t begin = offset_of(whole, raw);
      return error(ParseErrorKind::MalformedNumber, fmt::format("'{}'", token), {begin, begin + raw.size()});
    }
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return values;
}

// Removes a Markdown fence only when it wraps the entire payload.
std::string_view strip_fence(std::string_view text) {
  std::string_view t = trim(text);
  if (t.size() < 6 || t.substr(0, 3) != "```" || t.substr(t.size() - 3) != "```") return t;
  const auto nl = t.find('\n');
  if (nl == std::string_view::npos || nl > t.size() - 3) return t;
  std::string_view info = t.substr(3, nl - 3);
  if (info.find('`') != std::string_view::npos) return t;
  return t.substr(nl + 1, t.size() - 3 - (nl + 1));
}

std::variant<Json, ParseError> parse_json_payload(std::string_view text) {
  const std::string_view payload = strip_fence(text);
  Json doc = Json::parse(payload.begin(), payload.end(), nullptr, /*allow_exceptions=*/false,
                         /*ignore_comments=*/true);
  if (doc.is_discarded()) {
    return error(ParseErrorKind::NotJson, "payload is not a JSON document",
                 {offset_of(text, payload), offset_of(text, payload) + payload.size()});
  }
  if (!doc.is_object()) return error(ParseErrorKind::NotJson, "payload is not a JSON object");
  return doc;
}

const Json* member(const Json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::string lower_no_space(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (!std::isspace(c)) out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string json_escape_string(const std::string& s) { return Json(s).dump(-1, ' ', false, Json::error_handler_t::replace); }

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::MissingTag: return "MissingTag";
    case ParseErrorKind::MalformedNumber: return "MalformedNumber";
    case ParseErrorKind::HorizonMismatch: return "HorizonMismatch";
    case ParseErrorKind::NotJson: return "NotJson";
    case ParseErrorKind::MissingKey: return "MissingKey";
    case ParseErrorKind::BadMovementLabel: return "BadMovementLabel";
    case ParseErrorKind::BadWinnerString: return "BadWinnerString";
  }
  return "Unknown";
}

std::string ParseError::message() const {
  return fmt::format("{}({}) at bytes [{}, {})", to_string(kind), detail, span.begin, span.end);
}

std::string_view to_string(Movement movement) {
  switch (movement) {
    case Movement::Up: return "Up";
    case Movement::Down: return "Down";
    case Movement::Stable: return "Stable";
  }
  return "Stable";
}

std::string_view to_string(Winner winner) {
  switch (winner) {
    case Winner::ModelA: return "Model A";
    case Winner::ModelB: return "Model B";
    case Winner::Tie: return "Tie";
  }
  return "Tie";
}

std::string_view schema_key(Criterion criterion) {
  switch (criterion) {
    case Criterion::DomainRelevance: return "domain_relevance_winner";
    case Criterion::EventRelevance: return "event_relevance_winner";
    case Criterion::LogicToNumber: return "logic_to_number_winner";
    case Criterion::AnalyticalDepth: return "analytical_depth_winner";
    case Criterion::OverallPreference: return "overall_preference";
  }
  return "";
}

std::string_view display_name(Criterion criterion) {
  switch (criterion) {
    case Criterion::DomainRelevance: return "Domain Relevance";
    case Criterion::EventRelevance: return "Event Relevance & Plausibility";
    case Criterion::LogicToNumber: return "Logic-to-Number Consistency";
    case Criterion::AnalyticalDepth: return "Analytical Depth";
    case Criterion::OverallPreference: return "Overall Preference";
  }
  return "";
}

Winner JudgeVerdict::winner(Criterion criterion) const { return const_cast<JudgeVerdict*>(this)->winner(criterion); }

Winner& JudgeVerdict::winner(Criterion criterion) {
  switch (criterion) {
    case Criterion::DomainRelevance: return domain_relevance;
    case Criterion::EventRelevance: return event_relevance;
    case Criterion::LogicToNumber: return logic_to_number;
    case Criterion::AnalyticalDepth: return analytical_depth;
    case Criterion::OverallPreference: return overall_preference;
  }
  return overall_preference;
}

std::vector<double> MicroOutlook::values() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.adjusted_forecast_value);
  return out;
}

bool parse_real(std::string_view token, double& out) {
  // [+-]? (digits [. digits?] | . digits) ([eE] [+-]? digits)?
  std::size_t i = 0;
  const std::size_t n = token.size();
  if (i < n && (token[i] == '+' || token[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < n && std::isdigit(static_cast<unsigned char>(token[i]))) ++i, ++digits;
  if (i < n && token[i] == '.') {
    ++i;
    while (i < n && std::isdigit(static_cast<unsigned char>(token[i]))) ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < n && (token[i] == 'e' || token[i] == 'E')) {
    ++i;
    if (i < n && (token[i] == '+' || token[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < n && std::isdigit(static_cast<unsigned char>(token[i]))) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  if (i != n) return false;
  const char* begin = token.data() + (token[0] == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(begin, token.data() + n, out);
  return ec == std::errc{} && ptr == token.data() + n && std::isfinite(out);
}

std::variant<TagMatch, ParseError> find_tag(std::string_view text, std::string_view tag) {
  const std::string open = fmt::format("<{}>", tag);
  const std::string close = fmt::format("</{}>", tag);
  const auto start = text.find(open);
  if (start == std::string_view::npos) return error(ParseErrorKind::MissingTag, open);
  const auto body = start + open.size();
  const auto stop = text.find(close, body);
  if (stop == std::string_view::npos) return error(ParseErrorKind::MissingTag, close, {start, text.size()});
  return TagMatch{text.substr(body, stop - body), {start, stop + close.size()}};
}

ParseResult<TaggedForecast> parse_tagged_forecast(std::string_view text, int horizon) {
  auto reasoning = find_tag(text, "reasoning");
  if (auto* e = std::get_if<ParseError>(&reasoning)) return *e;
  auto values_tag = find_tag(text, "forecasted_values");
  if (auto* e = std::get_if<ParseError>(&values_tag)) return *e;

  const TagMatch& vt = std::get<TagMatch>(values_tag);
  const std::string_view body = trim(vt.content);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
    const std::size_t begin = offset_of(text, vt.content);
    return error(ParseErrorKind::MalformedNumber, "expected a bracketed array", {begin, begin + vt.content.size()});
  }
  auto parsed = parse_number_list(text, body.substr(1, body.size() - 2));
  if (auto* e = std::get_if<ParseError>(&parsed)) return *e;
  auto& values = std::get<std::vector<double>>(parsed);
  if (static_cast<int>(values.size()) != horizon) {
    return horizon_mismatch(horizon, static_cast<int>(values.size()), vt.span);
  }
  return TaggedForecast{std::string(trim(std::get<TagMatch>(reasoning).content)), std::move(values)};
}

ParseResult<std::vector<double>> parse_prediction_tag(std::string_view text, int horizon) {
  auto tag = find_tag(text, "prediction");
  if (auto* e = std::get_if<ParseError>(&tag)) return *e;
  const TagMatch& t = std::get<TagMatch>(tag);
  auto parsed = parse_number_list(text, t.content);
  if (auto* e = std::get_if<ParseError>(&parsed)) return *e;
  auto& values = std::get<std::vector<double>>(parsed);
  if (static_cast<int>(values.size()) != horizon) return horizon_mismatch(horizon, static_cast<int>(values.size()), t.span);
  return std::move(values);
}

ParseResult<MicroOutlook> parse_micro_json(std::string_view text, int horizon) {
  try {
    auto doc = parse_json_payload(text);
    if (auto* e = std::get_if<ParseError>(&doc)) return *e;
    const Json& root = std::get<Json>(doc);

    const Json* list = member(root, "timestamp_forecasts");
    if (!list) return error(ParseErrorKind::MissingKey, "timestamp_forecasts");
    if (!list->is_array()) return error(ParseErrorKind::MissingKey, "timestamp_forecasts (not a list)");

    MicroOutlook outlook;
    for (std::size_t i = 0; i < list->size(); ++i) {
      const Json& step = (*list)[i];
      const std::string path = fmt::format("timestamp_forecasts[{}]", i);
      auto string_field = [&](const Json& obj, const char* key, const std::string& at,
                              std::string& out) -> std::optional<ParseError> {
        const Json* v = member(obj, key);
        if (!v || !v->is_string()) return error(ParseErrorKind::MissingKey, at + "." + key);
        out = v->get<std::string>();
        return std::nullopt;
      };

      MicroStep s;
      const Json* ts = member(step, "timestamp");
      if (!ts || !ts->is_number_integer()) return error(ParseErrorKind::MissingKey, path + ".timestamp");
      s.timestamp = static_cast<int>(std::clamp<std::int64_t>(ts->get<std::int64_t>(), -1, 1 << 30));
      if (auto e = string_field(step, "date", path, s.date)) return *e;
      if (auto e = string_field(step, "day_info", path, s.day_info)) return *e;
      const Json* reasoning = member(step, "reasoning");
      if (!reasoning || !reasoning->is_object()) return error(ParseErrorKind::MissingKey, path + ".reasoning");
      std::string label;
      if (auto e = string_field(*reasoning, "movement_label", path + ".reasoning", label)) return *e;
      if (label == "Up") {
        s.movement = Movement::Up;
      } else if (label == "Down") {
        s.movement = Movement::Down;
      } else if (label == "Stable") {
        s.movement = Movement::Stable;
      } else {
        return error(ParseErrorKind::BadMovementLabel, fmt::format("{}: '{}'", path, label));
      }
      if (auto e = string_field(*reasoning, "key_drivers", path + ".reasoning", s.key_drivers)) return *e;
      const Json* value = member(step, "adjusted_forecast_value");
      if (!value) return error(ParseErrorKind::MissingKey, path + ".adjusted_forecast_value");
      if (!value->is_number() || !std::isfinite(value->get<double>())) {
        return error(ParseErrorKind::MalformedNumber, path + ".adjusted_forecast_value");
      }
      s.adjusted_forecast_value = value->get<double>();
      outlook.steps.push_back(std::move(s));
    }

    const int count = static_cast<int>(outlook.steps.size());
    if (count != horizon) return horizon_mismatch(horizon, count);
    for (int i = 0; i < count; ++i) {
      if (outlook.steps[i].timestamp != i + 1) {
        ParseError e = horizon_mismatch(horizon, count);
        e.detail = fmt::format("timestamps must run 1..{} in order; position {} holds {}", horizon, i + 1,
                               outlook.steps[i].timestamp);
        return e;
      }
    }
    return outlook;
  } catch (const std::exception& ex) {
    return error(ParseErrorKind::NotJson, ex.what());
  }
}

ParseResult<CalibrationCritique> parse_calibration(std::string_view text) {
  auto diagnosis = find_tag(text, "diagnosis");
  if (auto* e = std::get_if<ParseError>(&diagnosis)) return *e;
  auto guidelines = find_tag(text, "guidelines");
  if (auto* e = std::get_if<ParseError>(&guidelines)) return *e;
  CalibrationCritique c{std::string(trim(std::get<TagMatch>(diagnosis).content)),
                        std::string(trim(std::get<TagMatch>(guidelines).content))};
  if (c.diagnosis.empty()) return error(ParseErrorKind::MissingTag, "<diagnosis> is empty", std::get<TagMatch>(diagnosis).span);
  if (c.guidelines.empty()) return error(ParseErrorKind::MissingTag, "<guidelines> is empty", std::get<TagMatch>(guidelines).span);
  return c;
}

ParseResult<JudgeVerdict> parse_judge(std::string_view text) {
  try {
    auto doc = parse_json_payload(text);
    if (auto* e = std::get_if<ParseError>(&doc)) return *e;
    const Json& root = std::get<Json>(doc);
    JudgeVerdict verdict;
    for (Criterion c : kCriteria) {
      const std::string key(schema_key(c));
      const Json* v = member(root, key.c_str());
      if (!v) return error(ParseErrorKind::MissingKey, key);
      if (!v->is_string()) return error(ParseErrorKind::BadWinnerString, key + ": not a string");
      const std::string norm = lower_no_space(v->get<std::string>());
      if (norm == "modela") {
        verdict.winner(c) = Winner::ModelA;
      } else if (norm == "modelb") {
        verdict.winner(c) = Winner::ModelB;
      } else if (norm == "tie") {
        verdict.winner(c) = Winner::Tie;
      } else {
        return error(ParseErrorKind::BadWinnerString, fmt::format("{}: '{}'", key, v->get<std::string>()));
      }
    }
    const Json* j = member(root, "justification");
    if (!j || !j->is_string() || trim(j->get<std::string>()).empty()) {
      return error(ParseErrorKind::MissingKey, "justification");
    }
    verdict.justification = j->get<std::string>();
    return verdict;
  } catch (const std::exception& ex) {
    return error(ParseErrorKind::NotJson, ex.what());
  }
}

namespace {

// Strips list bullets and bold markers so "**Value:** 12" and "- Value: 12" both read as "Value: 12".
std::string normalize_label_line(std::string_view line) {
  std::string_view t = trim(line);
  while (!t.empty() && (t.front() == '-' || t.front() == '*' || t.front() == '#' || t.front() == ' ')) t.remove_prefix(1);
  std::string out(t);
  const auto colon = out.find(':');
  if (colon != std::string::npos) {
    std::string label = out.substr(0, colon);
    std::string rest = out.substr(colon + 1);
    label.erase(std::remove(label.begin(), label.end(), '*'), label.end());
    while (!rest.empty() && rest.front() == '*') rest.erase(0, 1);
    out = std::string(trim(label)) + ":" + rest;
  }
  return out;
}

bool take_label(const std::string& line, std::string_view label, std::string& rest) {
  if (line.size() < label.size() + 1 || line.compare(0, label.size(), label) != 0 || line[label.size()] != ':') {
    return false;
  }
  rest = std::string(trim(std::string_view(line).substr(label.size() + 1)));
  return true;
}

bool parse_timeline_value(std::string text, double& out) {
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
  // Thousands separators: 1,234,567.5
  if (text.find(',') != std::string::npos) {
    std::string digits;
    std::size_t group = 0;
    bool seen_comma = false;
    const std::size_t dot = text.find('.');
    const std::string integral = text.substr(0, dot);
    for (std::size_t i = 0; i < integral.size(); ++i) {
      const char c = integral[i];
      if (c == ',') {
        if ((seen_comma && group != 3) || (!seen_comma && (group == 0 || group > 3))) return false;
        seen_comma = true;
        group = 0;
      } else {
        digits += c;
        ++group;
      }
    }
    if (group != 3) return false;
    text = digits + (dot == std::string::npos ? "" : text.substr(dot));
  }
  return parse_real(text, out);
}

}  // namespace

ParseResult<std::vector<TimelineEntry>> parse_timeline(std::string_view text) {
  std::vector<TimelineEntry> entries;
  enum class Field { None, Content };
  Field open = Field::None;
  bool have_value = false;
  std::size_t entry_begin = 0;

  auto finish = [&](std::size_t at) -> std::optional<ParseError> {
    if (entries.empty()) return std::nullopt;
    auto& e = entries.back();
    if (!have_value) return error(ParseErrorKind::MissingKey, "Value for " + e.date, {entry_begin, at});
    e.content = std::string(trim(e.content));
    return std::nullopt;
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    const std::size_t line_begin = pos;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const std::string line = normalize_label_line(raw);
    std::string rest;
    if (take_label(line, "Date/Timestamp", rest) || take_label(line, "Date", rest)) {
      if (auto e = finish(line_begin)) return *e;
      entries.push_back({rest, 0.0, {}});
      have_value = false;
      open = Field::None;
      entry_begin = line_begin;
    } else if (entries.empty()) {
      continue;  // preamble
    } else if (take_label(line, "Value", rest)) {
      if (have_value) return error(ParseErrorKind::MissingKey, "duplicate Value for " + entries.back().date);
      if (!parse_timeline_value(rest, entries.back().value)) {
        return error(ParseErrorKind::MalformedNumber, fmt::format("'{}'", rest), {line_begin, line_begin + raw.size()});
      }
      have_value = true;
      open = Field::None;
    } else if (take_label(line, "Textual Content", rest)) {
      entries.back().content = rest;
      open = Field::Content;
    } else if (open == Field::Content) {
      auto& content = entries.back().content;
      content += "\n";
      content += trim(raw);
    }
  }
  if (auto e = finish(text.size())) return *e;
  if (entries.empty()) return error(ParseErrorKind::MissingKey, "Date/Timestamp");
  return entries;
}

ParseResult<std::string> parse_consolidated_guidelines(std::string_view text) {
  auto tag = find_tag(text, "guidelines");
  if (auto* e = std::get_if<ParseError>(&tag)) return *e;
  std::string body(trim(std::get<TagMatch>(tag).content));
  if (body == "NONE" || body == "None" || body == "none") body.clear();
  return body;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc{} ? std::string(buf, ptr) : fmt::format("{}", value);
}

std::string format_value_list(const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(format_number(v));
  return fmt::format("[{}]", fmt::join(parts, ", "));
}

std::string format_tagged_forecast(const TaggedForecast& forecast) {
  return fmt::format("<reasoning>\n{}\n</reasoning>\n<forecasted_values>\n{}\n</forecasted_values>", forecast.reasoning,
                     format_value_list(forecast.values));
}

std::string format_micro_json(const MicroOutlook& outlook) {
  Json list = Json::array();
  for (const auto& s : outlook.steps) {
    list.push_back(Json{{"timestamp", s.timestamp},
                        {"date", s.date},
                        {"day_info", s.day_info},
                        {"reasoning", Json{{"movement_label", std::string(to_string(s.movement))}, {"key_drivers", s.key_drivers}}},
                        {"adjusted_forecast_value", s.adjusted_forecast_value}});
  }
  return Json{{"timestamp_forecasts", std::move(list)}}.dump(2, ' ', false, Json::error_handler_t::replace);
}

std::string format_prediction(const std::string& reasoning, const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(format_number(v));
  return fmt::format("{}\n<prediction>{}</prediction>", reasoning, fmt::join(parts, ", "));
}

std::string format_calibration(const CalibrationCritique& critique) {
  return fmt::format("1. <diagnosis>{}</diagnosis>\n2. <guidelines>{}</guidelines>", critique.diagnosis,
                     critique.guidelines);
}

std::string format_judge(const JudgeVerdict& verdict) {
  std::string out = "{\n";
  for (Criterion c : kCriteria) {
    out += fmt::format("  \"{}\": \"{}\",\n", schema_key(c), to_string(verdict.winner(c)));
  }
  out += fmt::format("  \"justification\": {}\n}}", json_escape_string(verdict.justification));
  return out;
}

std::string format_timeline(const std::vector<TimelineEntry>& entries) {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += "\n\n";
    out += fmt::format("Date/Timestamp: {}\nValue: {}\nTextual Content: {}", entries[i].date,
                       format_number(entries[i].value), entries[i].content);
  }
  return out;
}

}  // namespace nexus
