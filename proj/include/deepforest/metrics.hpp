#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace deepforest {

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  // Squared Pearson correlation of observed and predicted values; absent when
  // either series is constant.
  std::optional<double> r2;
  // Sum of absolute residuals over sum of observations; absent when the
  // observations sum to zero.
  std::optional<double> ape;
  std::size_t n = 0;
};

// Standard (squared-residual) RMSE, MAE, squared-correlation R^2 and APE,
// all on the caller's scale. Needs equal lengths >= 2.
MetricsReport compute_metrics(std::span<const double> y, std::span<const double> y_pred);

std::string format_metrics_text(const MetricsReport& m);

}  // namespace deepforest
