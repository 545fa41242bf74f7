#include "deepforest/aqi.hpp"

#include <cmath>
#include <string>

#include "deepforest/error.hpp"

namespace deepforest {

AqiClass classify_aqi(double pm25) {
  if (!std::isfinite(pm25) || pm25 < 0.0) {
    throw UsageError("AQI needs a non-negative PM2.5 value, got " + std::to_string(pm25));
  }
  if (pm25 > kAqiTable.back().pm_high) return {kAqiTable.size() - 1, true};
  for (std::size_t i = 0; i < kAqiTable.size(); ++i) {
    if (pm25 >= kAqiTable[i].pm_low && pm25 <= kAqiTable[i].pm_high) return {i, false};
  }
  const double rounded = std::round(pm25 * 10.0) / 10.0;
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < kAqiTable.size(); ++i) {
    if (rounded >= kAqiTable[i].pm_low - kEps && rounded <= kAqiTable[i].pm_high + kEps) return {i, false};
  }
  return {kAqiTable.size() - 1, pm25 > kAqiTable.back().pm_high};
}

}  // namespace deepforest
