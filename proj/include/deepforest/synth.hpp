#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepforest/data.hpp"
#include "deepforest/raster.hpp"

namespace deepforest::synth {

// Noiseless target used by every generator, in ug/m3, from the 14 standard
// features (AOD, U, Lat, Long, T, DT, PBLH, SP, LAI, WS, WD, UV, RH, DOY):
//
//   f = 16 + 40 AOD / (0.25 + PBLH/1000) + 20 AOD RH^2
//       + 10 cos(2 pi (DOY - 15) / 365) + 0.8 max(0, 283 - T) - 2.5 WS
//       + 24 exp(-((Lat - 35.76)^2 + (Long - 51.45)^2) / (2 * 0.035^2)) + 3 U
//
// RH is a fraction; T in kelvin; PBLH in metres.
double target_function(std::span<const double> features);

// Magnus dew point (kelvin) from air temperature (kelvin) and RH fraction.
double dew_point(double t_kelvin, double rh);

struct BenchmarkOptions {
  std::size_t rows = 20000;
  std::uint64_t seed = 42;
  double noise_sd = 8.0;  // puts linear-model R^2 near 0.57
};

// Independent rows with feature marginals shaped after the station data
// summary (ranges, means, spreads) and target = target_function + noise.
// `truth` (optional) receives the noiseless targets.
Dataset make_benchmark(const BenchmarkOptions& options, std::vector<double>* truth = nullptr);

// A small city-scale world: per-day satellite rasters (two AOD sensors and a
// QA code grid on the fine grid), coarse meteorology rasters, hourly station
// readings and the matching noiseless dataset.
//
// Fields are sums of random plane waves, so they are spatially smooth. On
// each sensor grid a cell is missing with probability `missing_rate` and, if
// present, carries a +4.0 spike with probability 1 - window_pass_rate^(1/9)
// (QA code 3), so a fully valid 3x3 window is spike-free, and passes the
// dispersion gate, at rate `window_pass_rate`.
//
// Station day: PM_c = target_function(true features) + noise (>= 1). Hourly
// readings are PM_c (1 - RH/100) (1 + 0.15 sin(2 pi h / 24 + phase)) with RH
// in percent, constant through the day; a fraction of hours is missing and a
// fraction of station days is multiplied by 6 (outliers).
struct SceneOptions {
  std::uint64_t seed = 42;
  Date start{2019, 1, 1};
  std::size_t days = 30;
  std::size_t stations = 23;
  std::size_t rows = 40;
  std::size_t cols = 54;
  double xll = 51.24;
  double yll = 35.60;
  double cell_size = 0.005;
  std::size_t meteo_factor = 5;  // meteorology cell = factor * cell_size
  double noise_sd = 8.0;
  double missing_rate = 0.05;
  double window_pass_rate = 0.95;
  double best_qa_rate = 0.75;
  double hourly_missing_rate = 0.05;
  double outlier_rate = 0.01;
};

struct StationSite {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr std::array<std::string_view, 3> kSatelliteBands{"AOD_A", "AOD_T", "QA"};
inline constexpr std::array<std::string_view, 9> kMeteoBands{"T", "DT", "PBLH", "SP", "LAI",
                                                             "WS", "WD", "UV", "RH"};

struct Scene {
  std::vector<StationSite> sites;
  std::string stations_csv;  // station_id,lat,long,timestamp,pm25,rh_percent
  // Keyed by "<band>_<YYYY-MM-DD>".
  std::map<std::string, RasterGrid> satellite;
  std::map<std::string, RasterGrid> meteo;
  Dataset truth;  // true features at each station day, noiseless target
};

Scene make_scene(const SceneOptions& options);

// Writes stations.csv, satellite/, meteo/, truth.csv and a pipeline.cfg that
// points at them.
void write_scene(const std::string& dir, const Scene& scene, const SceneOptions& options);

}  // namespace deepforest::synth
