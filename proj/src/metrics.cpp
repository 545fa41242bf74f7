#include "deepforest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "deepforest/error.hpp"

namespace deepforest {

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> y_pred) {
  if (y.size() != y_pred.size()) {
    throw DataError("metrics: " + std::to_string(y.size()) + " observations vs " +
                    std::to_string(y_pred.size()) + " predictions");
  }
  if (y.size() < 2) throw DataError("metrics need at least 2 samples");
  const auto n = static_cast<double>(y.size());

  double sq = 0.0, abs_sum = 0.0, y_sum = 0.0, p_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - y_pred[i];
    sq += r * r;
    abs_sum += std::abs(r);
    y_sum += y[i];
    p_sum += y_pred[i];
  }
  MetricsReport m;
  m.n = y.size();
  m.rmse = std::sqrt(sq / n);
  m.mae = abs_sum / n;

  // Centred sums: algebraically the same ratio as the raw-sum correlation
  // formula, without its cancellation.
  const double y_mean = y_sum / n, p_mean = p_sum / n;
  double syy = 0.0, spp = 0.0, syp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y[i] - y_mean, dp = y_pred[i] - p_mean;
    syy += dy * dy;
    spp += dp * dp;
    syp += dy * dp;
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (!constant(y) && !constant(y_pred) && syy > 0.0 && spp > 0.0) {
    const double r = syp / std::sqrt(syy * spp);
    m.r2 = r * r;
  }
  if (y_sum != 0.0) m.ape = abs_sum / y_sum;
  return m;
}

std::string format_metrics_text(const MetricsReport& m) {
  char buf[256];
  std::string r2 = m.r2 ? std::to_string(*m.r2) : std::string("n/a");
  std::string ape = m.ape ? std::to_string(*m.ape * 100.0) + "%" : std::string("n/a");
  std::snprintf(buf, sizeof buf, "n=%zu  RMSE=%.4f  MAE=%.4f  R2=%s  APE=%s", m.n, m.rmse, m.mae,
                r2.c_str(), ape.c_str());
  return buf;
}

}  // namespace deepforest
