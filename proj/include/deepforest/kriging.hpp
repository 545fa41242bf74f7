#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deepforest/execution.hpp"

namespace deepforest {

// Planar coordinates (longitude, latitude in degrees at city scale) plus a
// field value.
struct SpatialPoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

struct Location {
  double x = 0.0;
  double y = 0.0;
};

enum class VariogramKind { spherical, exponential, gaussian };

std::string to_string(VariogramKind kind);
VariogramKind parse_variogram_kind(const std::string& text);

// gamma(0) = 0; for h > 0, gamma(h) = nugget + psill * g(h / range) with
//   spherical   g(r) = 1.5 r - 0.5 r^3 (r < 1), 1 beyond
//   exponential g(r) = 1 - exp(-3 r)
//   gaussian    g(r) = 1 - exp(-3 r^2)
// (practical-range parameterisation: exponential and gaussian reach 95% of
// the partial sill at h = range).
struct VariogramModel {
  VariogramKind kind = VariogramKind::spherical;
  double nugget = 0.0;
  double psill = 1.0;
  double range = 1.0;

  double operator()(double h) const;
  double sill() const { return nugget + psill; }
  void validate() const;
};

double variogram_shape(VariogramKind kind, double r);

struct VariogramBin {
  double lag = 0.0;  // mean separation of the pairs in the bin
  double semivariance = 0.0;
  std::size_t pairs = 0;
};

// Half squared differences averaged in equal-width distance bins over
// [0, max_dist]; empty bins are omitted. Throws DataError when fewer than 2
// points are given or all points coincide.
std::vector<VariogramBin> empirical_variogram(std::span<const SpatialPoint> points, std::size_t n_bins,
                                              double max_dist);
// Defaults: 15 bins up to half the largest pairwise distance.
std::vector<VariogramBin> empirical_variogram(std::span<const SpatialPoint> points);

struct VariogramFit {
  VariogramModel model;
  double objective = 0.0;  // pair-weighted sum of squared residuals
  bool fallback = false;
};

// Pair-count weighted least squares over (nugget, psill, range) with
// nugget, psill >= 0. For a fixed range the problem is a two-parameter
// non-negative least squares solved exactly; the range is located by a
// log-spaced scan refined with golden-section search. Needs >= 3 bins.
// When the optimiser fails it falls back to nugget 0, psill =
// `sample_variance` (or the mean binned semivariance), range = half the
// largest lag, and logs a warning.
VariogramFit fit_variogram(std::span<const VariogramBin> bins, VariogramKind kind,
                           std::optional<double> sample_variance = std::nullopt);

struct KrigingPrediction {
  double value = 0.0;
  double variance = 0.0;
};

struct KrigingSolution {
  std::vector<double> weights;
  double lagrange = 0.0;
  double value = 0.0;
  double variance = 0.0;
};

// Ordinary kriging over a fixed sample set. The augmented semivariance
// matrix is factorised once and shared read-only by all target solves.
class OrdinaryKriging {
 public:
  // Samples at identical locations are merged (values averaged) with a
  // warning. Throws NumericalError when the system is singular.
  OrdinaryKriging(std::span<const SpatialPoint> samples, const VariogramModel& model);

  const std::vector<SpatialPoint>& samples() const { return samples_; }

  KrigingSolution solve(Location target) const;
  KrigingPrediction predict(Location target) const;
  std::vector<KrigingPrediction> predict(std::span<const Location> targets,
                                         Execution exec = Execution::parallel) const;

 private:
  std::vector<SpatialPoint> samples_;
  VariogramModel model_;
  bool zero_variogram_ = false;
  double scale_ = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

std::vector<SpatialPoint> merge_duplicate_locations(std::span<const SpatialPoint> samples);

std::vector<KrigingPrediction> krige_predict(std::span<const SpatialPoint> samples, const VariogramModel& model,
                                             std::span<const Location> targets,
                                             Execution exec = Execution::parallel);

// Kriging from the `neighbours` nearest samples of each target (ties by
// sample order). Equivalent to krige_predict when neighbours >= sample count.
std::vector<KrigingPrediction> krige_predict_local(std::span<const SpatialPoint> samples,
                                                   const VariogramModel& model,
                                                   std::span<const Location> targets, std::size_t neighbours,
                                                   Execution exec = Execution::parallel);

struct KrigingSelection {
  VariogramKind kind = VariogramKind::spherical;
  VariogramModel model;
  // Cross-validated RMSE per candidate, in candidate order (nullopt: failed).
  std::vector<std::optional<double>> cv_rmse;
};

// k-fold cross-validated RMSE per candidate kind (variogram refitted on each
// training fold); returns the minimiser, refitted on all samples. Ties within
// 1e-12 keep the earlier candidate. Throws NumericalError when every kind
// fails.
KrigingSelection kriging_grid_search(std::span<const SpatialPoint> samples,
                                     std::span<const VariogramKind> candidates, std::size_t cv_folds,
                                     std::uint64_t seed = 0);

}  // namespace deepforest
