#include "nexus/metrics.hpp"

#include <fmt/format.h>

namespace nexus {

double relative_improvement(double baseline, double treatment) {
  if (!(baseline > 0.0)) {
    throw Error(ErrorKind::NonPositiveBaseline, fmt::format("baseline must be positive, got {}", baseline));
  }
  return (baseline - treatment) / baseline;
}

std::string format_improvement(double fraction) {
  const double percent = fraction * 100.0;
  if (percent < 0.0) return fmt::format("↑{:.1f}%", -percent);
  return fmt::format("↓{:.1f}%", percent);
}

std::string format_metric(double value) { return fmt::format("{:.4f}", value); }

}  // namespace nexus
