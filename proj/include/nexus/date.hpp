#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace nexus {

/// Calendar date at day resolution.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  constexpr Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}) {}

  /// Parses strict ISO-8601 `YYYY-MM-DD`.
  static std::optional<Date> parse(std::string_view text);

  std::string iso() const;
  /// English weekday name, e.g. "Friday".
  std::string weekday_name() const;

  constexpr std::chrono::sys_days days() const { return days_; }
  constexpr Date plus_days(int n) const { return Date{days_ + std::chrono::days{n}}; }
  constexpr int days_since(Date other) const { return static_cast<int>((days_ - other.days_).count()); }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

enum class Frequency { Weekly };

std::string_view to_string(Frequency frequency);
std::optional<Frequency> parse_frequency(std::string_view text);
int step_days(Frequency frequency);

/// Date `steps` periods after `origin`.
Date advance(Date origin, Frequency frequency, int steps);

}  // namespace nexus
