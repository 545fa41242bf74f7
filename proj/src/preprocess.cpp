#include "deepforest/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "deepforest/error.hpp"
#include "deepforest/log.hpp"

namespace deepforest {

std::optional<double> correct_pm_humidity(double pm, double rh_percent) {
  if (!std::isfinite(pm) || !std::isfinite(rh_percent)) return std::nullopt;
  if (pm < 0.0 || rh_percent < 0.0 || rh_percent >= 100.0) return std::nullopt;
  return pm / (1.0 - rh_percent / 100.0);
}

StationSeries daily_average(const StationSeries& series) {
  struct Acc {
    double pm = 0.0, rh = 0.0;
    std::size_t n_pm = 0, n_rh = 0;
  };
  std::map<Date, Acc> days;
  for (const auto& r : series.readings) {
    auto& a = days[r.date];
    if (r.pm25 && std::isfinite(*r.pm25)) {
      a.pm += *r.pm25;
      ++a.n_pm;
    }
    if (r.rh_percent && std::isfinite(*r.rh_percent)) {
      a.rh += *r.rh_percent;
      ++a.n_rh;
    }
  }
  StationSeries out{series.station_id, series.lat, series.lon, {}};
  for (const auto& [date, a] : days) {
    StationReading d;
    d.timestamp = date.to_string();
    d.date = date;
    if (a.n_pm > 0) d.pm25 = a.pm / static_cast<double>(a.n_pm);
    if (a.n_rh > 0) d.rh_percent = a.rh / static_cast<double>(a.n_rh);
    out.readings.push_back(std::move(d));
  }
  return out;
}

double quantile_inclusive(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty list");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

IqrResult iqr_filter(std::span<const double> values) {
  IqrResult out;
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.size() < 4) {
    log_warning("iqr_filter: " + std::to_string(finite.size()) + " values (< 4); passing through");
    out.passthrough = true;
    for (std::size_t i = 0; i < values.size(); ++i) {
      (std::isfinite(values[i]) ? out.inliers : out.outliers).push_back(i);
    }
    return out;
  }
  std::sort(finite.begin(), finite.end());
  out.q1 = quantile_inclusive(finite, 0.25);
  out.q3 = quantile_inclusive(finite, 0.75);
  const double iqr = out.q3 - out.q1;
  const double lo = out.q1 - iqr, hi = out.q3 + iqr;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    (std::isfinite(v) && v >= lo && v <= hi ? out.inliers : out.outliers).push_back(i);
  }
  return out;
}

std::optional<double> normalize_aod_pblh(double aod, double pblh) {
  if (!std::isfinite(aod) || !std::isfinite(pblh) || pblh <= 0.0) return std::nullopt;
  return aod / pblh;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("fit_line: x and y lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw NumericalError("fit_line needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw NumericalError("fit_line: predictor is constant");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

SensorRegression fit_sensor_regression(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> terra, aqua;
  for (const auto& [t, a] : pairs) {
    if (!std::isfinite(t) || !std::isfinite(a)) continue;
    terra.push_back(t);
    aqua.push_back(a);
  }
  SensorRegression out;
  auto attempt = [&](std::span<const double> x, std::span<const double> y, const char* name) {
    std::optional<LinearFit> fit;
    try {
      fit = fit_line(x, y);
    } catch (const NumericalError& e) {
      log_warning(std::string("sensor regression ") + name + " unavailable: " + e.what());
    }
    return fit;
  };
  out.aqua_to_terra = attempt(aqua, terra, "aqua->terra");
  out.terra_to_aqua = attempt(terra, aqua, "terra->aqua");
  return out;
}

std::optional<double> merge_daily_aod(std::optional<double> aod_aqua, std::optional<double> aod_terra,
                                      const SensorRegression& fit) {
  if (aod_aqua && aod_terra) return 0.5 * (*aod_aqua + *aod_terra);
  if (aod_aqua) {
    if (!fit.aqua_to_terra) return aod_aqua;
    return 0.5 * (*aod_aqua + (*fit.aqua_to_terra)(*aod_aqua));
  }
  if (aod_terra) {
    if (!fit.terra_to_aqua) return aod_terra;
    return 0.5 * ((*fit.terra_to_aqua)(*aod_terra) + *aod_terra);
  }
  return std::nullopt;
}

WindowResult extract_window(const RasterGrid& grid, CellIndex center, const WindowGates& gates) {
  if (center.row >= grid.rows() || center.col >= grid.cols()) {
    throw DataError("window centre outside the raster");
  }
  std::vector<double> valid;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const auto r = static_cast<long long>(center.row) + dr;
      const auto c = static_cast<long long>(center.col) + dc;
      if (r < 0 || c < 0 || r >= static_cast<long long>(grid.rows()) ||
          c >= static_cast<long long>(grid.cols())) {
        continue;
      }
      if (auto v = grid.get(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) valid.push_back(*v);
    }
  }
  WindowResult out;
  out.n_valid = valid.size();
  double mean = 0.0;
  for (double v : valid) mean += v;
  if (!valid.empty()) mean /= static_cast<double>(valid.size());
  if (valid.size() >= 2) {
    double ss = 0.0;
    for (double v : valid) ss += (v - mean) * (v - mean);
    out.stdev = std::sqrt(ss / static_cast<double>(valid.size() - 1));
  }
  if (valid.size() < gates.min_valid || valid.empty()) {
    out.status = WindowStatus::too_few_valid;
  } else if (out.stdev && !(*out.stdev < gates.max_std)) {
    out.status = WindowStatus::too_dispersed;
  } else {
    out.status = WindowStatus::ok;
    out.aod = mean;
  }
  return out;
}

WindowResult extract_window(const RasterGrid& grid, double lat, double lon, const WindowGates& gates) {
  const auto cell = grid.cell_of(lon, lat);
  if (!cell) {
    throw DataError("window centre (" + std::to_string(lat) + ", " + std::to_string(lon) +
                    ") outside raster '" + grid.band() + "'");
  }
  return extract_window(grid, *cell, gates);
}

QAFlags qa_from_code(int code) {
  switch (code) {
    case 0:
      return {AdjacencyClass::normal, CloudClass::clear};
    case 1:
      return {AdjacencyClass::normal, CloudClass::other};
    case 2:
      return {AdjacencyClass::other, CloudClass::clear};
    case 3:
      return {AdjacencyClass::other, CloudClass::other};
  }
  throw DataError("unknown QA code " + std::to_string(code));
}

int qa_code(const QAFlags& flags) {
  const bool adj = flags.adjacency != AdjacencyClass::other;
  const bool cloud = flags.cloud != CloudClass::other;
  return (adj ? 0 : 2) + (cloud ? 0 : 1);
}

bool best_quality(const QAFlags& flags) {
  return flags.adjacency != AdjacencyClass::other && flags.cloud != CloudClass::other;
}

double compute_uncertainty(std::span<const QAFlags, 9> window) {
  const auto n_best = std::count_if(window.begin(), window.end(), best_quality);
  return static_cast<double>(n_best) / 9.0;
}

namespace {

bool best_code_at(const RasterGrid& qa, long long r, long long c) {
  if (r < 0 || c < 0 || r >= static_cast<long long>(qa.rows()) || c >= static_cast<long long>(qa.cols())) {
    return false;
  }
  const auto v = qa.get(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  return v && *v == 0.0;
}

}  // namespace

double compute_uncertainty(const RasterGrid& qa, CellIndex center) {
  if (center.row >= qa.rows() || center.col >= qa.cols()) throw DataError("QA window centre outside the raster");
  int n_best = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      n_best += best_code_at(qa, static_cast<long long>(center.row) + dr, static_cast<long long>(center.col) + dc);
    }
  }
  return static_cast<double>(n_best) / 9.0;
}

RasterGrid mask_non_best(const RasterGrid& aod, const RasterGrid& qa) {
  if (!aod.aligned_with(qa)) throw DataError("AOD and QA rasters are not aligned");
  RasterGrid out = aod;
  for (std::size_t r = 0; r < aod.rows(); ++r) {
    for (std::size_t c = 0; c < aod.cols(); ++c) {
      if (!best_code_at(qa, static_cast<long long>(r), static_cast<long long>(c))) out.set_missing(r, c);
    }
  }
  return out;
}

}  // namespace deepforest
