#include "nexus/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nexus/error.hpp"

namespace nexus {

Eigen::VectorXd TimeSeries::values() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out[static_cast<Eigen::Index>(i)] = points[i].value;
  return out;
}

void TimeSeries::validate() const {
  if (points.empty()) throw Error(ErrorKind::BadSpec, "series '" + entity_id + "' is empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].value)) {
      throw Error(ErrorKind::NonFiniteValue, "series '" + entity_id + "' has a non-finite value at " + points[i].date.iso());
    }
    if (i > 0 && !(points[i - 1].date < points[i].date)) {
      throw Error(ErrorKind::BadSpec, "series '" + entity_id + "' dates are not strictly increasing at " + points[i].date.iso());
    }
  }
}

const std::string* EventStream::find(Date date) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), date,
                             [](const EventEntry& e, Date d) { return e.date < d; });
  if (it != entries.end() && it->date == date) return &it->text;
  return nullptr;
}

std::string_view to_string(Setting setting) {
  return setting == Setting::Multimodal ? "multimodal" : "numerical_only";
}

std::optional<Setting> parse_setting(std::string_view text) {
  if (text == "multimodal") return Setting::Multimodal;
  if (text == "numerical_only" || text == "numerical-only" || text == "numerical") return Setting::NumericalOnly;
  return std::nullopt;
}

void MultimodalContext::validate() const {
  series.validate();
  if (!events) return;
  std::set<Date> dates;
  for (const auto& p : series.points) dates.insert(p.date);
  for (std::size_t i = 0; i < events->entries.size(); ++i) {
    const auto& e = events->entries[i];
    if (i > 0 && !(events->entries[i - 1].date < e.date)) {
      throw Error(ErrorKind::BadSpec, "event dates are not strictly increasing at " + e.date.iso());
    }
    if (!dates.contains(e.date)) {
      throw Error(ErrorKind::BadSpec, "event dated " + e.date.iso() + " is not aligned to a series date");
    }
  }
}

}  // namespace nexus
