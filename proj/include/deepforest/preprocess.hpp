#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepforest/data.hpp"
#include "deepforest/raster.hpp"

namespace deepforest {

// pm / (1 - rh/100). nullopt for a rejected reading: rh >= 100, rh < 0,
// pm < 0 or non-finite inputs.
std::optional<double> correct_pm_humidity(double pm, double rh_percent);

struct StationReading {
  std::string timestamp;  // ISO-8601 as read; the calendar day for daily records
  Date date;
  std::optional<double> pm25;
  std::optional<double> rh_percent;
};

struct StationSeries {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<StationReading> readings;
};

// One reading per calendar day, in date order. PM and RH are averaged
// independently over their valid hourly values; a quantity with no valid
// value that day is missing.
StationSeries daily_average(const StationSeries& series);

// Quantile with linear interpolation between order statistics at position
// p * (n - 1) of the sorted values.
double quantile_inclusive(std::span<const double> sorted, double p);

struct IqrResult {
  std::vector<std::size_t> inliers;   // indices into the input, ascending
  std::vector<std::size_t> outliers;  // indices into the input, ascending
  double q1 = 0.0;
  double q3 = 0.0;
  bool passthrough = false;  // fewer than 4 values: everything kept
};

// Keeps v iff q1 - iqr <= v <= q3 + iqr. Non-finite values are outliers.
IqrResult iqr_filter(std::span<const double> values);

// aod / pblh; nullopt when pblh <= 0 or an input is not finite.
std::optional<double> normalize_aod_pblh(double aod, double pblh);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  // squared Pearson correlation; 0 when the response is constant

  double operator()(double x) const { return slope * x + intercept; }
};

// Ordinary least squares y = slope * x + intercept. Throws NumericalError
// for fewer than 2 points or a constant predictor.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct SensorRegression {
  std::optional<LinearFit> aqua_to_terra;  // predicts Terra from Aqua
  std::optional<LinearFit> terra_to_aqua;  // predicts Aqua from Terra
};

// Pairs are (terra, aqua) values observed on the same cell and day. Each
// direction is fitted separately; a direction whose predictor is constant
// is left empty and logged.
SensorRegression fit_sensor_regression(std::span<const std::pair<double, double>> pairs);

// Both present: mean. One present: the other is filled from the matching
// regression direction, then averaged; without that direction the present
// value is returned. Both missing: nullopt.
std::optional<double> merge_daily_aod(std::optional<double> aod_aqua, std::optional<double> aod_terra,
                                      const SensorRegression& fit);

struct WindowGates {
  std::size_t min_valid = 3;
  double max_std = 0.5;  // sample standard deviation must be strictly below
};

enum class WindowStatus { ok, too_few_valid, too_dispersed };

struct WindowResult {
  std::optional<double> aod;
  std::size_t n_valid = 0;
  std::optional<double> stdev;  // sample stdev of the valid cells; needs 2
  WindowStatus status = WindowStatus::too_few_valid;
};

// 3x3 neighbourhood of a cell. Window cells beyond the grid edge count as
// missing.
WindowResult extract_window(const RasterGrid& grid, CellIndex center, const WindowGates& gates = {});
// Same, for the cell containing (lat, lon). Throws DataError outside the grid.
WindowResult extract_window(const RasterGrid& grid, double lat, double lon, const WindowGates& gates = {});

enum class AdjacencyClass { normal, clear, other };
enum class CloudClass { clear, possibly_cloudy, other };

struct QAFlags {
  AdjacencyClass adjacency = AdjacencyClass::other;
  CloudClass cloud = CloudClass::other;
  bool operator==(const QAFlags&) const = default;
};

// QA raster codes:
//   0  adjacency normal, cloud clear        (best on both masks)
//   1  adjacency normal, cloud other        (adjacency ok only)
//   2  adjacency other,  cloud clear        (cloud ok only)
//   3  adjacency other,  cloud other        (neither)
QAFlags qa_from_code(int code);
int qa_code(const QAFlags& flags);
bool best_quality(const QAFlags& flags);

// N_b / 9 over a 3x3 window.
double compute_uncertainty(std::span<const QAFlags, 9> window);
// Window taken from a QA code raster; missing or out-of-grid cells are not
// best quality.
double compute_uncertainty(const RasterGrid& qa, CellIndex center);

// Copy of `aod` with every cell whose QA code is not best (or missing)
// masked. Grids must be aligned.
RasterGrid mask_non_best(const RasterGrid& aod, const RasterGrid& qa);

}  // namespace deepforest
