#include "deepforest/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "deepforest/data.hpp"
#include "deepforest/error.hpp"
#include "deepforest/log.hpp"

namespace deepforest {

std::string to_string(VariogramKind kind) {
  switch (kind) {
    case VariogramKind::spherical:
      return "spherical";
    case VariogramKind::exponential:
      return "exponential";
    case VariogramKind::gaussian:
      return "gaussian";
  }
  return "spherical";
}

VariogramKind parse_variogram_kind(const std::string& text) {
  if (text == "spherical") return VariogramKind::spherical;
  if (text == "exponential") return VariogramKind::exponential;
  if (text == "gaussian") return VariogramKind::gaussian;
  throw UsageError("unknown variogram kind '" + text + "'");
}

double variogram_shape(VariogramKind kind, double r) {
  switch (kind) {
    case VariogramKind::spherical:
      return r < 1.0 ? 1.5 * r - 0.5 * r * r * r : 1.0;
    case VariogramKind::exponential:
      return 1.0 - std::exp(-3.0 * r);
    case VariogramKind::gaussian:
      return 1.0 - std::exp(-3.0 * r * r);
  }
  return 1.0;
}

double VariogramModel::operator()(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + psill * variogram_shape(kind, h / range);
}

void VariogramModel::validate() const {
  if (!(nugget >= 0.0) || !(psill >= 0.0)) throw NumericalError("variogram nugget and sill must be >= 0");
  if (!(range > 0.0) || !std::isfinite(range)) throw NumericalError("variogram range must be > 0");
}

namespace {

double distance(double x0, double y0, double x1, double y1) { return std::hypot(x1 - x0, y1 - y0); }

}  // namespace

std::vector<VariogramBin> empirical_variogram(std::span<const SpatialPoint> points, std::size_t n_bins,
                                              double max_dist) {
  if (points.size() < 2) throw DataError("empirical variogram needs at least 2 points");
  if (!(max_dist > 0.0)) throw UsageError("variogram max distance must be > 0");
  if (n_bins == 0) throw UsageError("variogram needs at least one bin");
  const bool coincident = std::all_of(points.begin(), points.end(), [&](const SpatialPoint& p) {
    return p.x == points[0].x && p.y == points[0].y;
  });
  if (coincident) throw DataError("empirical variogram: all points coincide");

  const double width = max_dist / static_cast<double>(n_bins);
  std::vector<double> lag_sum(n_bins, 0.0), gamma_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double h = distance(points[i].x, points[i].y, points[j].x, points[j].y);
      if (h > max_dist) continue;
      const auto b = std::min(static_cast<std::size_t>(h / width), n_bins - 1);
      const double dv = points[i].value - points[j].value;
      lag_sum[b] += h;
      gamma_sum[b] += 0.5 * dv * dv;
      ++count[b];
    }
  }
  std::vector<VariogramBin> bins;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const auto c = static_cast<double>(count[b]);
    bins.push_back({lag_sum[b] / c, gamma_sum[b] / c, count[b]});
  }
  return bins;
}

std::vector<VariogramBin> empirical_variogram(std::span<const SpatialPoint> points) {
  double max_pair = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      max_pair = std::max(max_pair, distance(points[i].x, points[i].y, points[j].x, points[j].y));
    }
  }
  if (points.size() >= 2 && max_pair == 0.0) throw DataError("empirical variogram: all points coincide");
  return empirical_variogram(points, 15, 0.5 * max_pair);
}

namespace {

struct LinearFit {
  double nugget = 0.0;
  double psill = 0.0;
  double objective = std::numeric_limits<double>::infinity();
};

// Non-negative weighted least squares for gamma = nugget * [h > 0] + psill * g(h / range).
LinearFit fit_sills(std::span<const VariogramBin> bins, VariogramKind kind, double range) {
  double saa = 0, sab = 0, sbb = 0, say = 0, sby = 0;
  std::vector<double> a(bins.size()), b(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double w = static_cast<double>(bins[k].pairs);
    a[k] = bins[k].lag > 0.0 ? 1.0 : 0.0;
    b[k] = bins[k].lag > 0.0 ? variogram_shape(kind, bins[k].lag / range) : 0.0;
    saa += w * a[k] * a[k];
    sab += w * a[k] * b[k];
    sbb += w * b[k] * b[k];
    say += w * a[k] * bins[k].semivariance;
    sby += w * b[k] * bins[k].semivariance;
  }
  auto objective = [&](double c0, double c) {
    double s = 0.0;
    for (std::size_t k = 0; k < bins.size(); ++k) {
      const double r = bins[k].semivariance - c0 * a[k] - c * b[k];
      s += static_cast<double>(bins[k].pairs) * r * r;
    }
    return s;
  };
  LinearFit best;
  auto consider = [&](double c0, double c) {
    if (!(c0 >= 0.0) || !(c >= 0.0) || !std::isfinite(c0) || !std::isfinite(c)) return;
    const double obj = objective(c0, c);
    if (obj < best.objective) best = {c0, c, obj};
  };
  const double det = saa * sbb - sab * sab;
  if (std::abs(det) > 1e-12 * std::max(1.0, saa * sbb)) {
    consider((say * sbb - sby * sab) / det, (sby * saa - say * sab) / det);
  }
  consider(0.0, sbb > 0.0 ? std::max(0.0, sby / sbb) : 0.0);
  consider(saa > 0.0 ? std::max(0.0, say / saa) : 0.0, 0.0);
  return best;
}

}  // namespace

VariogramFit fit_variogram(std::span<const VariogramBin> bins, VariogramKind kind,
                           std::optional<double> sample_variance) {
  if (bins.size() < 3) {
    throw DataError("variogram fit needs at least 3 non-empty bins, got " + std::to_string(bins.size()));
  }
  double max_lag = 0.0, min_lag = std::numeric_limits<double>::infinity();
  for (const auto& b : bins) {
    max_lag = std::max(max_lag, b.lag);
    if (b.lag > 0.0) min_lag = std::min(min_lag, b.lag);
  }

  auto fallback = [&](const std::string& why) {
    double sill = 0.0, w = 0.0;
    for (const auto& b : bins) {
      sill += static_cast<double>(b.pairs) * b.semivariance;
      w += static_cast<double>(b.pairs);
    }
    VariogramFit f;
    f.model = {kind, 0.0, sample_variance.value_or(w > 0.0 ? sill / w : 0.0),
               max_lag > 0.0 ? 0.5 * max_lag : 1.0};
    f.fallback = true;
    f.objective = std::numeric_limits<double>::quiet_NaN();
    log_warning("variogram fit (" + to_string(kind) + ") failed: " + why + "; using fallback parameters");
    return f;
  };
  if (!(max_lag > 0.0) || !std::isfinite(min_lag)) return fallback("no positive lags");
  for (const auto& b : bins) {
    if (!std::isfinite(b.semivariance) || !std::isfinite(b.lag)) return fallback("non-finite bins");
  }

  // Log-spaced scan over the range, then golden-section refinement between
  // the neighbours of the best scan point.
  const double lo = min_lag * 1e-2;
  const double hi = max_lag * 10.0;
  constexpr int kScan = 200;
  std::vector<double> ranges(kScan);
  for (int i = 0; i < kScan; ++i) {
    ranges[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (kScan - 1));
  }
  std::size_t best_i = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double obj = fit_sills(bins, kind, ranges[i]).objective;
    if (obj < best_obj) {
      best_obj = obj;
      best_i = i;
    }
  }
  if (!std::isfinite(best_obj)) return fallback("objective is not finite");

  double a = ranges[best_i == 0 ? 0 : best_i - 1];
  double b = ranges[std::min(best_i + 1, ranges.size() - 1)];
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = fit_sills(bins, kind, c).objective, fd = fit_sills(bins, kind, d).objective;
  for (int it = 0; it < 200 && (b - a) > 1e-13 * b; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = fit_sills(bins, kind, c).objective;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = fit_sills(bins, kind, d).objective;
    }
  }
  double range = 0.5 * (a + b);
  LinearFit sills = fit_sills(bins, kind, range);
  if (best_obj < sills.objective) {
    range = ranges[best_i];
    sills = fit_sills(bins, kind, range);
  }
  if (!std::isfinite(sills.objective)) return fallback("refinement diverged");

  VariogramFit fit;
  fit.model = {kind, sills.nugget, sills.psill, range};
  fit.objective = sills.objective;
  return fit;
}

// ---------------------------------------------------------------------------
// Ordinary kriging

std::vector<SpatialPoint> merge_duplicate_locations(std::span<const SpatialPoint> samples) {
  std::map<std::pair<double, double>, std::size_t> seen;
  std::vector<SpatialPoint> out;
  std::vector<std::size_t> counts;
  bool merged = false;
  for (const auto& p : samples) {
    const auto [it, inserted] = seen.try_emplace({p.x, p.y}, out.size());
    if (inserted) {
      out.push_back(p);
      counts.push_back(1);
    } else {
      auto& q = out[it->second];
      auto& c = counts[it->second];
      q.value = (q.value * static_cast<double>(c) + p.value) / static_cast<double>(c + 1);
      ++c;
      merged = true;
    }
  }
  if (merged) {
    log_warning("kriging: " + std::to_string(samples.size() - out.size()) +
                " duplicate sample locations merged by averaging");
  }
  return out;
}

namespace {

Eigen::MatrixXd kriging_matrix(std::span<const SpatialPoint> s, const VariogramModel& m) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd a(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& p = s[static_cast<std::size_t>(i)];
      const auto& q = s[static_cast<std::size_t>(j)];
      const double g = m(distance(p.x, p.y, q.x, q.y));
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, n) = 1.0;
    a(n, i) = 1.0;
  }
  a(n, n) = 0.0;
  return a;
}

Eigen::VectorXd kriging_rhs(std::span<const SpatialPoint> s, const VariogramModel& m, Location t) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = s[static_cast<std::size_t>(i)];
    b(i) = m(distance(p.x, p.y, t.x, t.y));
  }
  b(n) = 1.0;
  return b;
}

KrigingSolution finish_solution(std::span<const SpatialPoint> s, const Eigen::VectorXd& rhs,
                                const Eigen::VectorXd& sol) {
  const auto n = s.size();
  KrigingSolution out;
  out.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = sol(static_cast<Eigen::Index>(i));
    out.value += out.weights[i] * s[i].value;
    out.variance += out.weights[i] * rhs(static_cast<Eigen::Index>(i));
  }
  out.lagrange = sol(static_cast<Eigen::Index>(n));
  out.variance += out.lagrange;
  return out;
}

// Smooth variograms over closely spaced samples can leave the exact system
// numerically singular; a nugget of up to 1e-4 of the sill is then added.
// gamma(0) stays 0, so sample points are still reproduced.
Eigen::FullPivLU<Eigen::MatrixXd> factorize(std::span<const SpatialPoint> s, VariogramModel& model) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kriging_matrix(s, model));
  for (double jitter : {1e-8, 1e-6, 1e-4}) {
    if (lu.isInvertible()) return lu;
    model.nugget = std::max(model.nugget, jitter * model.sill());
    lu.compute(kriging_matrix(s, model));
  }
  if (!lu.isInvertible()) throw NumericalError("kriging system is singular");
  return lu;
}

}  // namespace

OrdinaryKriging::OrdinaryKriging(std::span<const SpatialPoint> samples, const VariogramModel& model)
    : samples_(merge_duplicate_locations(samples)), model_(model) {
  if (samples_.empty()) throw DataError("kriging needs at least one sample");
  model_.validate();
  // Weights do not depend on the variogram's scale; a flat zero variogram is
  // solved with a unit partial sill and reports zero variance.
  if (model_.sill() == 0.0) {
    model_.psill = 1.0;
    zero_variogram_ = true;
  }
  // Solved with the variogram divided by its sill so that the unbiasedness
  // row is on the same scale as the semivariances.
  scale_ = model_.sill();
  model_.nugget /= scale_;
  model_.psill /= scale_;
  const double nugget = model_.nugget;
  lu_ = factorize(samples_, model_);
  if (model_.nugget != nugget) {
    log_info("kriging system is near-singular; nugget raised to " + std::to_string(model_.nugget * scale_));
  }
}

KrigingSolution OrdinaryKriging::solve(Location target) const {
  const Eigen::VectorXd rhs = kriging_rhs(samples_, model_, target);
  const Eigen::VectorXd sol = lu_.solve(rhs);
  auto out = finish_solution(samples_, rhs, sol);
  out.variance *= scale_;
  out.lagrange *= scale_;
  return out;
}

KrigingPrediction OrdinaryKriging::predict(Location target) const {
  const auto s = solve(target);
  return {s.value, zero_variogram_ ? 0.0 : s.variance};
}

std::vector<KrigingPrediction> OrdinaryKriging::predict(std::span<const Location> targets, Execution exec) const {
  std::vector<KrigingPrediction> out(targets.size());
  for_each_index(targets.size(), exec, [&](std::size_t i) { out[i] = predict(targets[i]); });
  return out;
}

std::vector<KrigingPrediction> krige_predict(std::span<const SpatialPoint> samples, const VariogramModel& model,
                                             std::span<const Location> targets, Execution exec) {
  return OrdinaryKriging(samples, model).predict(targets, exec);
}

std::vector<KrigingPrediction> krige_predict_local(std::span<const SpatialPoint> samples,
                                                   const VariogramModel& model,
                                                   std::span<const Location> targets, std::size_t neighbours,
                                                   Execution exec) {
  const auto merged = merge_duplicate_locations(samples);
  if (neighbours == 0) throw UsageError("local kriging needs at least one neighbour");
  if (neighbours >= merged.size()) return krige_predict(merged, model, targets, exec);
  model.validate();
  VariogramModel base = model;
  const bool zero_variogram = base.sill() == 0.0;
  if (zero_variogram) base.psill = 1.0;
  const double scale = base.sill();
  base.nugget /= scale;
  base.psill /= scale;

  std::vector<KrigingPrediction> out(targets.size());
  for_each_index(targets.size(), exec, [&](std::size_t t) {
    const auto target = targets[t];
    std::vector<std::pair<double, std::size_t>> dist(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      dist[i] = {distance(merged[i].x, merged[i].y, target.x, target.y), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(neighbours), dist.end());
    std::vector<SpatialPoint> local;
    local.reserve(neighbours);
    for (std::size_t k = 0; k < neighbours; ++k) local.push_back(merged[dist[k].second]);
    VariogramModel m = base;
    const auto lu = factorize(local, m);
    const Eigen::VectorXd rhs = kriging_rhs(local, m, target);
    const auto sol = finish_solution(local, rhs, lu.solve(rhs));
    out[t] = {sol.value, zero_variogram ? 0.0 : sol.variance * scale};
  });
  return out;
}

namespace {

// Small or coarse sample sets can leave fewer than 3 lag bins inside half the
// largest distance; widen to every pair, then fall back to fixed parameters.
VariogramModel fit_for_search(std::span<const SpatialPoint> points, VariogramKind kind, double var) {
  auto bins = empirical_variogram(points);
  double max_pair = 0.0;
  if (bins.size() < 3) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        max_pair = std::max(max_pair, distance(points[i].x, points[i].y, points[j].x, points[j].y));
      }
    }
    bins = empirical_variogram(points, 15, max_pair);
  }
  if (bins.size() >= 3) return fit_variogram(bins, kind, var).model;
  log_warning("variogram fit (" + to_string(kind) + "): only " + std::to_string(bins.size()) +
              " lag bins; using fallback parameters");
  return {kind, 0.0, var, 0.5 * max_pair};
}

}  // namespace

KrigingSelection kriging_grid_search(std::span<const SpatialPoint> samples,
                                     std::span<const VariogramKind> candidates, std::size_t cv_folds,
                                     std::uint64_t seed) {
  if (candidates.empty()) throw UsageError("kriging grid search needs at least one variogram kind");
  const auto points = merge_duplicate_locations(samples);
  double mean = 0.0;
  for (const auto& p : points) mean += p.value;
  mean /= static_cast<double>(std::max<std::size_t>(points.size(), 1));
  double var = 0.0;
  for (const auto& p : points) var += (p.value - mean) * (p.value - mean);
  var /= static_cast<double>(std::max<std::size_t>(points.size(), 2) - 1);

  KrigingSelection sel;
  if (var == 0.0) {
    // Any valid variogram reproduces a constant field exactly.
    sel.kind = candidates[0];
    sel.model = {candidates[0], 0.0, 0.0, 1.0};
    sel.cv_rmse.assign(candidates.size(), 0.0);
    return sel;
  }
  auto fit_all = [&](VariogramKind kind) { return fit_for_search(points, kind, var); };
  if (candidates.size() == 1) {
    sel.kind = candidates[0];
    sel.model = fit_all(candidates[0]);
    sel.cv_rmse.push_back(std::nullopt);
    return sel;
  }
  const auto folds = kfold_indices(points.size(), cv_folds, seed);

  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    try {
      double sse = 0.0;
      for (const auto& fold : folds) {
        std::vector<SpatialPoint> train, valid;
        for (auto i : fold.train) train.push_back(points[i]);
        for (auto i : fold.valid) valid.push_back(points[i]);
        double tmean = 0.0, tvar = 0.0;
        for (const auto& p : train) tmean += p.value;
        tmean /= static_cast<double>(train.size());
        for (const auto& p : train) tvar += (p.value - tmean) * (p.value - tmean);
        tvar /= static_cast<double>(std::max<std::size_t>(train.size(), 2) - 1);
        const auto model = fit_for_search(train, candidates[c], tvar);
        const OrdinaryKriging ok(train, model);
        for (const auto& p : valid) {
          const double r = ok.predict({p.x, p.y}).value - p.value;
          sse += r * r;
        }
      }
      const double rmse = std::sqrt(sse / static_cast<double>(points.size()));
      if (!std::isfinite(rmse)) throw NumericalError("non-finite cross-validation error");
      sel.cv_rmse.push_back(rmse);
      if (!best || rmse < *sel.cv_rmse[*best] - 1e-12) best = c;
    } catch (const std::exception& e) {
      log_warning("kriging grid search: " + to_string(candidates[c]) + " failed: " + e.what());
      sel.cv_rmse.push_back(std::nullopt);
    }
  }
  if (!best) throw NumericalError("kriging grid search: every variogram kind failed");
  sel.kind = candidates[*best];
  sel.model = fit_all(sel.kind);
  return sel;
}

}  // namespace deepforest
