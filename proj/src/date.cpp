#include "nexus/date.hpp"

#include <array>
#include <charconv>

#include <fmt/format.h>

namespace nexus {

namespace {

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::optional<Date> Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{std::chrono::sys_days{ymd}};
}

std::string Date::iso() const {
  const std::chrono::year_month_day ymd{days_};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

std::string Date::weekday_name() const {
  static constexpr std::array<const char*, 7> kNames = {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                                        "Thursday", "Friday", "Saturday"};
  return kNames[std::chrono::weekday{days_}.c_encoding()];
}

std::string_view to_string(Frequency frequency) {
  switch (frequency) {
    case Frequency::Weekly: return "weekly";
  }
  return "weekly";
}

std::optional<Frequency> parse_frequency(std::string_view text) {
  if (text == "weekly" || text == "Weekly") return Frequency::Weekly;
  return std::nullopt;
}

int step_days(Frequency frequency) {
  switch (frequency) {
    case Frequency::Weekly: return 7;
  }
  return 7;
}

Date advance(Date origin, Frequency frequency, int steps) { return origin.plus_days(step_days(frequency) * steps); }

}  // namespace nexus
