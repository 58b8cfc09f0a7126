#include "nexus/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "nexus/error.hpp"

namespace nexus {

namespace {

[[noreturn]] void malformed(const std::string& source, int line, const std::string& what) {
  throw Error(ErrorKind::MalformedCsv, fmt::format("{}:{}: {}", source, line, what));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    // from_chars rejects "nan"/"inf" spellings only partially; treat any leftover as malformed.
    return std::nullopt;
  }
  return value;
}

bool looks_non_finite(std::string_view text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (!t.empty() && (t[0] == '+' || t[0] == '-')) t.erase(0, 1);
  return t == "nan" || t == "inf" || t == "infinity";
}

Date parse_date_field(std::string_view text, const std::string& source, int line) {
  auto d = Date::parse(trim(text));
  if (!d) malformed(source, line, fmt::format("invalid ISO date '{}'", text));
  return *d;
}

void expect_header(const CsvTable& table, std::initializer_list<std::string_view> names, const std::string& source) {
  std::vector<std::string> got;
  for (const auto& h : table.header) got.push_back(trim(h));
  if (got.size() != names.size() || !std::equal(got.begin(), got.end(), names.begin())) {
    malformed(source, 1, fmt::format("expected header '{}'", fmt::join(names, ",")));
  }
}

Date week_start(Date d) {
  const unsigned iso_index = std::chrono::weekday{d.days()}.iso_encoding() - 1;  // Monday = 0
  return d.plus_days(-static_cast<int>(iso_index));
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;
  int line = 1;
  int record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (table.header.empty()) {
      table.header = std::move(record);
    } else {
      if (record.size() != table.header.size()) {
        malformed(source, record_line,
                  fmt::format("expected {} fields, found {}", table.header.size(), record.size()));
      }
      table.rows.push_back(std::move(record));
      table.row_lines.push_back(record_line);
    }
    record.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) malformed(source, line, "quote inside unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (record_has_content || !field.empty()) end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (field_was_quoted) malformed(source, line, "text after closing quote");
        field += c;
        record_has_content = true;
    }
  }
  if (in_quotes) malformed(source, record_line, "unterminated quoted field");
  if (record_has_content || !field.empty()) end_record();
  if (table.header.empty()) malformed(source, 1, "missing header");
  return table;
}

TimeSeries parse_series_csv(std::string_view text, const std::string& entity_id, const std::string& source) {
  const CsvTable table = parse_csv(text, source);
  expect_header(table, {"date", "value"}, source);
  TimeSeries series;
  series.entity_id = entity_id;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.row_lines[r];
    const Date date = parse_date_field(row[0], source, line);
    if (looks_non_finite(row[1])) {
      throw Error(ErrorKind::NonFiniteValue, fmt::format("{}:{}: non-finite value '{}'", source, line, row[1]));
    }
    auto value = parse_double(row[1]);
    if (!value) malformed(source, line, fmt::format("invalid number '{}'", row[1]));
    if (!std::isfinite(*value)) {
      throw Error(ErrorKind::NonFiniteValue, fmt::format("{}:{}: non-finite value '{}'", source, line, row[1]));
    }
    series.points.push_back({date, *value});
  }
  std::stable_sort(series.points.begin(), series.points.end(),
                   [](const SeriesPoint& a, const SeriesPoint& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < series.points.size(); ++i) {
    if (series.points[i].date == series.points[i - 1].date) {
      throw Error(ErrorKind::DuplicateDate, fmt::format("{}: duplicate date {}", source, series.points[i].date.iso()));
    }
  }
  return series;
}

TimeSeries load_series(const std::filesystem::path& path, const std::string& entity_id) {
  return parse_series_csv(read_text_file(path), entity_id, path.string());
}

EventStream parse_events_csv(std::string_view text, const std::string& source) {
  const CsvTable table = parse_csv(text, source);
  expect_header(table, {"date", "text"}, source);
  std::vector<EventEntry> raw;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    raw.push_back({parse_date_field(table.rows[r][0], source, table.row_lines[r]), table.rows[r][1]});
  }
  std::stable_sort(raw.begin(), raw.end(), [](const EventEntry& a, const EventEntry& b) { return a.date < b.date; });

  EventStream stream;
  for (auto& e : raw) {
    if (!stream.entries.empty() && week_start(stream.entries.back().date) == week_start(e.date)) {
      auto& prev = stream.entries.back();
      prev.text += "\n" + e.text;
    } else {
      stream.entries.push_back(std::move(e));
    }
  }
  return stream;
}

EventStream load_events(const std::filesystem::path& path) {
  return parse_events_csv(read_text_file(path), path.string());
}

EventStream align_events(const TimeSeries& series, const EventStream& events) {
  EventStream out;
  for (const auto& e : events.entries) {
    auto it = std::lower_bound(series.points.begin(), series.points.end(), e.date,
                               [](const SeriesPoint& p, Date d) { return p.date < d; });
    if (it == series.points.end()) continue;
    if (it->date.days_since(e.date) >= step_days(series.frequency)) continue;
    if (e.text.empty()) continue;
    if (!out.entries.empty() && out.entries.back().date == it->date) {
      out.entries.back().text += "\n" + e.text;
    } else {
      out.entries.push_back({it->date, e.text});
    }
  }
  return out;
}

std::vector<Date> ForecastTask::future_dates() const {
  std::vector<Date> out;
  const Date last = last_context_date();
  for (int step = 1; step <= horizon; ++step) out.push_back(advance(last, frequency, step));
  return out;
}

std::vector<double> ForecastTask::truth_values() const {
  std::vector<double> out;
  for (const auto& p : truth) out.push_back(p.value);
  return out;
}

ForecastTask make_task(const MultimodalContext& full, int origin_index, int horizon, int context_length,
                       Setting setting) {
  const auto& points = full.series.points;
  if (horizon < 1 || context_length < 1) {
    throw Error(ErrorKind::BadSpec, "horizon and context length must be positive");
  }
  if (origin_index < 0 || origin_index >= static_cast<int>(points.size())) {
    throw Error(ErrorKind::WindowTooShort, fmt::format("origin {} outside history of {} points", origin_index, points.size()));
  }
  if (origin_index + 1 < context_length) {
    throw Error(ErrorKind::WindowTooShort,
                fmt::format("origin {} leaves only {} points of history for a context of {}", origin_index,
                            origin_index + 1, context_length));
  }

  ForecastTask task;
  task.entity_id = full.series.entity_id;
  task.origin_index = origin_index;
  task.horizon = horizon;
  task.frequency = full.series.frequency;
  task.context_length = context_length;
  task.setting = setting;
  task.context.target_name = full.target_name;
  task.context.domain_label = full.domain_label;
  task.context.series.entity_id = full.series.entity_id;
  task.context.series.frequency = full.series.frequency;

  const int first = origin_index - context_length + 1;
  task.context.series.points.assign(points.begin() + first, points.begin() + origin_index + 1);
  if (setting == Setting::Multimodal) {
    EventStream events;
    if (full.events) {
      for (const auto& p : task.context.series.points) {
        if (const auto* text = full.events->find(p.date)) events.entries.push_back({p.date, *text});
      }
    }
    task.context.events = std::move(events);
  }

  const int last_truth = std::min<int>(origin_index + horizon, static_cast<int>(points.size()) - 1);
  for (int i = origin_index + 1; i <= last_truth; ++i) {
    task.truth.push_back(points[i]);
    if (full.events) {
      if (const auto* text = full.events->find(points[i].date)) task.truth_events.push_back({points[i].date, *text});
    }
  }
  return task;
}

std::vector<ForecastTask> make_tasks(const MultimodalContext& full, Date eval_start, Date eval_end, int horizon,
                                     int context_length, int stride, Setting setting) {
  if (horizon < 1 || context_length < 1 || stride < 1) {
    throw Error(ErrorKind::BadSpec, "horizon, context length and stride must be positive");
  }
  full.validate();
  const auto& points = full.series.points;
  const auto lo = std::lower_bound(points.begin(), points.end(), eval_start,
                                   [](const SeriesPoint& p, Date d) { return p.date < d; });
  const auto hi = std::upper_bound(points.begin(), points.end(), eval_end,
                                   [](Date d, const SeriesPoint& p) { return d < p.date; });
  const int window = static_cast<int>(std::max<std::ptrdiff_t>(0, hi - lo));
  if (window < horizon) {
    throw Error(ErrorKind::WindowTooShort,
                fmt::format("evaluation window holds {} points, fewer than horizon {}", window, horizon));
  }
  const int first_eval = static_cast<int>(lo - points.begin());

  std::vector<ForecastTask> tasks;
  for (int offset = 0; offset + horizon <= window; offset += stride) {
    tasks.push_back(make_task(full, first_eval + offset - 1, horizon, context_length, setting));
  }
  return tasks;
}

void EvalConfig::validate() const {
  if (horizons.empty()) throw Error(ErrorKind::Config, "at least one horizon is required");
  for (int h : horizons) {
    if (h < 1) throw Error(ErrorKind::Config, fmt::format("horizon must be positive, got {}", h));
  }
  if (context_length < 1) throw Error(ErrorKind::Config, "context length must be positive");
  if (stride < 1) throw Error(ErrorKind::Config, "stride must be >= 1");
}

EvalConfig EvalConfig::zillow() { return EvalConfig{{4, 8, 13}, 156, 1}; }

EvalConfig EvalConfig::stocks() { return EvalConfig{{6, 13, 26}, 52, 1}; }

double autocorrelation(const Eigen::VectorXd& values, int lag) {
  const Eigen::Index n = values.size();
  if (lag <= 0 || lag >= n) return 0.0;
  const Eigen::VectorXd centered = values.array() - values.mean();
  const double denom = centered.squaredNorm();
  if (denom == 0.0) return 0.0;
  return centered.head(n - lag).dot(centered.tail(n - lag)) / denom;
}

BasicFeatures ts_features(const TimeSeries& series) {
  const int n = static_cast<int>(series.size());
  if (n < 8) throw Error(ErrorKind::SeriesTooShort, fmt::format("features need at least 8 points, got {}", n));
  const Eigen::VectorXd y = series.values();

  BasicFeatures f;
  f.count = n;
  f.first_date = series.points.front().date;
  f.last_date = series.points.back().date;
  f.mean = y.mean();
  f.std = std::sqrt((y.array() - f.mean).square().sum() / static_cast<double>(n - 1));
  f.min = y.minCoeff();
  f.max = y.maxCoeff();
  f.last_value = y[n - 1];

  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const Eigen::VectorXd xc = x.array() - x.mean();
  f.trend_slope = xc.dot(y.array().matrix() - Eigen::VectorXd::Constant(n, f.mean)) / xc.squaredNorm();

  double best = -std::numeric_limits<double>::infinity();
  for (int lag = 2; lag <= n / 2; ++lag) {
    const double r = autocorrelation(y, lag);
    if (r > best) {
      best = r;
      f.top_autocorr_lag = lag;
    }
  }
  f.recent_change_4step = y[n - 1] - y[n - 5];
  return f;
}

std::string render_features(const BasicFeatures& f) {
  return fmt::format(
      "- Observations: {}\n"
      "- Date Range: {} to {}\n"
      "- Mean: {:.4f}\n"
      "- Standard Deviation: {:.4f}\n"
      "- Minimum: {:.4f}\n"
      "- Maximum: {:.4f}\n"
      "- Last Value: {:.4f}\n"
      "- Linear Trend Slope (per step): {:.4f}\n"
      "- Dominant Autocorrelation Lag (steps): {}\n"
      "- Change Over Last 4 Steps: {:.4f}",
      f.count, f.first_date.iso(), f.last_date.iso(), f.mean, f.std, f.min, f.max, f.last_value, f.trend_slope,
      f.top_autocorr_lag, f.recent_change_4step);
}

MultimodalContext synth_context(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.length < 16) throw Error(ErrorKind::BadSpec, fmt::format("synthetic length must be >= 16, got {}", spec.length));
  if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) throw Error(ErrorKind::BadSpec, "noise_sd must be >= 0");
  if (!(spec.event_rate >= 0.0 && spec.event_rate <= 1.0)) throw Error(ErrorKind::BadSpec, "event_rate must lie in [0, 1]");
  if (spec.seasonal_period == 1 || spec.seasonal_period < 0) {
    throw Error(ErrorKind::BadSpec, "seasonal_period must be 0 (none) or >= 2");
  }
  if (!std::isfinite(spec.trend) || !std::isfinite(spec.base_level) || !std::isfinite(spec.seasonal_amplitude)) {
    throw Error(ErrorKind::BadSpec, "trend, base level and amplitude must be finite");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  static constexpr const char* kDrivers[] = {"demand", "supply", "policy", "sentiment"};
  MultimodalContext ctx;
  ctx.series.entity_id = spec.entity_id;
  ctx.target_name = spec.target_name;
  ctx.domain_label = spec.domain_label;
  EventStream events;
  double shift = 0.0;
  for (int i = 0; i < spec.length; ++i) {
    const Date date = advance(spec.start_date, Frequency::Weekly, i);
    // One draw of each kind per step keeps streams aligned regardless of parameters.
    const double eps = noise(rng);
    const double u_event = unit(rng);
    const double u_size = unit(rng);
    const double u_sign = unit(rng);
    const double u_driver = unit(rng);
    if (u_event < spec.event_rate) {
      const double pct = 3.0 + 5.0 * u_size;
      const bool up = u_sign < 0.5;
      shift += (up ? 1.0 : -1.0) * pct / 100.0 * spec.base_level;
      const char* driver = kDrivers[static_cast<int>(u_driver * 4.0) % 4];
      events.entries.push_back(
          {date, fmt::format("{} {} shock: reports point to a {} of roughly {:.1f}% in {}.", spec.entity_id, driver,
                             up ? "rise" : "decline", pct, spec.target_name)});
    }
    double value = spec.base_level + spec.trend * i + shift + spec.noise_sd * eps;
    if (spec.seasonal_period >= 2) {
      value += spec.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * i / spec.seasonal_period);
    }
    ctx.series.points.push_back({date, value});
  }
  ctx.events = std::move(events);
  return ctx;
}

std::map<Date, std::vector<double>> load_external_forecasts(const std::filesystem::path& path) {
  const std::string source = path.string();
  const CsvTable table = parse_csv(read_text_file(path), source);
  expect_header(table, {"origin_date", "step", "value"}, source);
  std::map<Date, std::map<int, double>> steps;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.row_lines[r];
    const Date origin = parse_date_field(row[0], source, line);
    auto step = parse_double(row[1]);
    auto value = parse_double(row[2]);
    if (!step || *step < 1 || std::floor(*step) != *step) malformed(source, line, "step must be a positive integer");
    if (!value || !std::isfinite(*value)) malformed(source, line, "invalid value");
    if (!steps[origin].emplace(static_cast<int>(*step), *value).second) malformed(source, line, "duplicate step");
  }
  std::map<Date, std::vector<double>> out;
  for (const auto& [origin, by_step] : steps) {
    std::vector<double> values;
    int expected = 1;
    for (const auto& [step, value] : by_step) {
      if (step != expected++) malformed(source, 0, "steps for origin " + origin.iso() + " are not contiguous from 1");
      values.push_back(value);
    }
    out.emplace(origin, std::move(values));
  }
  return out;
}

}  // namespace nexus
