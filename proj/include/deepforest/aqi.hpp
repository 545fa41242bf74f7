#pragma once

#include <array>
#include <string_view>

namespace deepforest {

struct AqiCategory {
  std::string_view label;
  double pm_low = 0.0;   // µg/m³, inclusive
  double pm_high = 0.0;  // µg/m³, inclusive
  int index_low = 0;
  int index_high = 0;
};

inline constexpr std::array<AqiCategory, 6> kAqiTable{{
    {"Good", 0.0, 12.0, 0, 50},
    {"Moderate", 12.1, 35.4, 51, 100},
    {"Unhealthy for Sensitive Groups", 35.5, 55.4, 101, 150},
    {"Unhealthy", 55.5, 150.4, 151, 200},
    {"Very Unhealthy", 150.5, 250.4, 201, 300},
    {"Hazardous", 250.5, 500.4, 301, 500},
}};

struct AqiClass {
  std::size_t category = 0;  // index into kAqiTable
  bool out_of_table = false;  // above 500.4

  const AqiCategory& info() const { return kAqiTable[category]; }
};

// Values between printed bounds (e.g. 12.04) are rounded to one decimal
// first. Throws UsageError for negative or non-finite input.
AqiClass classify_aqi(double pm25);

}  // namespace deepforest
