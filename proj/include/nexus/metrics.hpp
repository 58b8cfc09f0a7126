#pragma once

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Core>

#include "nexus/error.hpp"

namespace nexus {

/// Actuals with magnitude below this make relative error undefined.
inline constexpr double kNearZeroActual = 1e-9;

namespace detail {

template <typename DerivedA, typename DerivedP>
void check_lengths(const Eigen::MatrixBase<DerivedA>& actual, const Eigen::MatrixBase<DerivedP>& predicted) {
  if (actual.size() != predicted.size() || actual.size() == 0) {
    throw Error(ErrorKind::LengthMismatch,
                "metric inputs must have equal nonzero lengths (got " + std::to_string(actual.size()) + " and " +
                    std::to_string(predicted.size()) + ")");
  }
}

}  // namespace detail

/// Mean absolute percentage error as a fraction: mean(|a - p| / |a|).
template <typename DerivedA, typename DerivedP>
typename DerivedA::Scalar mape(const Eigen::MatrixBase<DerivedA>& actual, const Eigen::MatrixBase<DerivedP>& predicted) {
  using Scalar = typename DerivedA::Scalar;
  detail::check_lengths(actual, predicted);
  const auto magnitude = actual.array().abs().eval();
  if ((magnitude < Scalar(kNearZeroActual)).any()) {
    throw Error(ErrorKind::NearZeroActual, "MAPE undefined: an actual value is within 1e-9 of zero");
  }
  return ((actual - predicted.template cast<Scalar>()).array().abs() / magnitude).mean();
}

/// Root mean squared error.
template <typename DerivedA, typename DerivedP>
typename DerivedA::Scalar rmse(const Eigen::MatrixBase<DerivedA>& actual, const Eigen::MatrixBase<DerivedP>& predicted) {
  using Scalar = typename DerivedA::Scalar;
  detail::check_lengths(actual, predicted);
  return std::sqrt((actual - predicted.template cast<Scalar>()).squaredNorm() / Scalar(actual.size()));
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> values) {
  return {values.data(), static_cast<Eigen::Index>(values.size())};
}

inline double mape(std::span<const double> actual, std::span<const double> predicted) {
  return mape(as_vector(actual), as_vector(predicted));
}

inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
  return rmse(as_vector(actual), as_vector(predicted));
}

/// (baseline - treatment) / baseline; positive means the treatment improved on the baseline.
double relative_improvement(double baseline, double treatment);

/// "↓14.7%" for an improvement, "↑3.0%" for a regression, one decimal.
std::string format_improvement(double fraction);

/// Fixed four-decimal rendering used by every report cell.
std::string format_metric(double value);

}  // namespace nexus
