#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "deepforest/error.hpp"
#include "deepforest/kriging.hpp"
#include "deepforest/log.hpp"
#include "deepforest/rng.hpp"
#include "oracles.hpp"

using namespace deepforest;

namespace {

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

std::vector<SpatialPoint> scattered(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<SpatialPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0.0, 1.0), y = rng.uniform(0.0, 1.0);
    pts.push_back({x, y, scale * (std::sin(5 * x) + std::cos(3 * y) + 0.1 * rng.normal())});
  }
  return pts;
}

// Zero-mean Gaussian process sample with covariance sill - gamma(h), drawn
// through a hand-rolled Cholesky factor.
std::vector<SpatialPoint> simulate(const VariogramModel& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpatialPoint> pts(n);
  for (auto& p : pts) {
    p.x = rng.uniform(0.0, 1.0);
    p.y = rng.uniform(0.0, 1.0);
  }
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double c = m.sill() - m(dist(pts[i].x, pts[i].y, pts[j].x, pts[j].y));
      if (i == j) c += 1e-9;
      for (std::size_t k = 0; k < j; ++k) c -= l[i][k] * l[j][k];
      l[i][j] = i == j ? std::sqrt(c) : c / l[j][j];
    }
  }
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += l[i][k] * z[k];
    pts[i].value = 5.0 + s;
  }
  return pts;
}

struct QuietLog {
  std::vector<std::string> warnings;
  LogSink previous;
  QuietLog() {
    previous = set_log_sink([this](LogLevel lv, std::string_view m) {
      if (lv == LogLevel::warning) warnings.emplace_back(m);
    });
  }
  ~QuietLog() { set_log_sink(previous); }
};

}  // namespace

TEST_CASE("variogram closed forms") {
  const VariogramModel sph{VariogramKind::spherical, 0.1, 2.0, 10.0};
  CHECK(sph(0.0) == 0.0);
  CHECK(sph(5.0) == doctest::Approx(0.1 + 2.0 * (0.75 - 0.0625)));
  CHECK(sph(10.0) == doctest::Approx(2.1));
  CHECK(sph(50.0) == doctest::Approx(2.1));
  const VariogramModel gau{VariogramKind::gaussian, 0.2, 1.0, 3.0};
  CHECK(gau(3.0) == doctest::Approx(0.2 + (1.0 - std::exp(-3.0))).epsilon(1e-14));
  CHECK(gau(3.0) == doctest::Approx(0.2 + 0.95 * 1.0).epsilon(1e-3));
  const VariogramModel ex{VariogramKind::exponential, 0.0, 1.0, 2.0};
  CHECK(ex(2.0) == doctest::Approx(1.0 - std::exp(-3.0)));
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential, VariogramKind::gaussian}) {
    const VariogramModel m{kind, 0.3, 1.5, 4.0};
    double prev = 0.0;
    for (double h = 0.0; h < 20.0; h += 0.05) {
      CHECK(m(h) >= prev);
      prev = m(h);
    }
    CHECK(parse_variogram_kind(to_string(kind)) == kind);
  }
}

TEST_CASE("empirical variogram examples") {
  std::vector<SpatialPoint> flat;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) flat.push_back({double(i), double(j), 3.0});
  }
  for (const auto& b : empirical_variogram(flat)) CHECK(b.semivariance == 0.0);

  const std::vector<SpatialPoint> two{{0, 0, 0}, {1, 0, 2}};
  const auto bins = empirical_variogram(two, 4, 2.0);
  REQUIRE(bins.size() == 1);
  CHECK(bins[0].semivariance == 2.0);
  CHECK(bins[0].pairs == 1);

  CHECK_THROWS_AS(empirical_variogram(std::vector<SpatialPoint>{{0, 0, 1}}), DataError);
  CHECK_THROWS_AS(empirical_variogram(std::vector<SpatialPoint>{{1, 1, 1}, {1, 1, 2}}), DataError);
}

TEST_CASE("empirical variogram matches brute-force pair enumeration") {
  std::vector<SpatialPoint> g;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) g.push_back({double(i), double(j), double(i)});
  }
  const std::size_t n_bins = 7;
  const double max_dist = 4.9;
  const double width = max_dist / n_bins;
  std::map<std::size_t, std::vector<std::pair<double, double>>> oracle_bins;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      const double h = dist(g[i].x, g[i].y, g[j].x, g[j].y);
      if (h > max_dist) continue;
      const double dv = g[i].value - g[j].value;
      oracle_bins[static_cast<std::size_t>(std::floor(h / width))].push_back({h, 0.5 * dv * dv});
    }
  }
  const auto bins = empirical_variogram(g, n_bins, max_dist);
  REQUIRE(bins.size() == oracle_bins.size());
  std::size_t k = 0;
  double prev = -1.0;
  for (const auto& [b, pairs] : oracle_bins) {
    double hs = 0.0, gs = 0.0;
    for (const auto& [h, gm] : pairs) {
      hs += h;
      gs += gm;
    }
    const double n = static_cast<double>(pairs.size());
    CHECK(bins[k].pairs == pairs.size());
    CHECK(bins[k].lag == doctest::Approx(hs / n).epsilon(1e-9));
    CHECK(std::abs(bins[k].semivariance - gs / n) <= 1e-9);
    CHECK(bins[k].semivariance > prev);
    prev = bins[k].semivariance;
    ++k;
  }
}

TEST_CASE("variogram fit recovers an exact spherical curve") {
  const VariogramModel truth{VariogramKind::spherical, 0.0, 1.0, 10.0};
  std::vector<VariogramBin> bins;
  for (double h = 0.5; h <= 20.0; h += 0.5) bins.push_back({h, truth(h), 100});
  const auto fit = fit_variogram(bins, VariogramKind::spherical);
  CHECK_FALSE(fit.fallback);
  CHECK(std::abs(fit.model.nugget) <= 1e-3);
  CHECK(std::abs(fit.model.psill - 1.0) <= 1e-3);
  CHECK(std::abs(fit.model.range - 10.0) <= 1e-3);
  CHECK(fit.objective <= 1e-8);
}

TEST_CASE("variogram fit on flat bins puts everything in the sill") {
  std::vector<VariogramBin> bins;
  for (double h = 1.0; h <= 10.0; h += 1.0) bins.push_back({h, 0.7, 50});
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential, VariogramKind::gaussian}) {
    const auto fit = fit_variogram(bins, kind);
    CHECK(fit.model.sill() == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(fit.objective <= 1e-6);
    CHECK(fit.model.range > 0.0);
    CHECK(fit.model.nugget >= 0.0);
    CHECK(fit.model.psill >= 0.0);
  }
  CHECK_THROWS(fit_variogram(std::vector<VariogramBin>(bins.begin(), bins.begin() + 2), VariogramKind::spherical));
}

TEST_CASE("kriging weights sum to one and variances are non-negative") {
  const auto pts = scattered(60, 1);
  Rng rng(2);
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential, VariogramKind::gaussian}) {
    const VariogramModel m{kind, 0.05, 1.0, 0.4};
    const OrdinaryKriging ok(pts, m);
    for (int t = 0; t < 200; ++t) {
      const Location loc{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
      const auto s = ok.solve(loc);
      double sum = 0.0;
      for (double w : s.weights) sum += w;
      CHECK(std::abs(sum - 1.0) <= 1e-10);
      CHECK(s.variance >= -1e-10);
    }
  }
}

TEST_CASE("zero-nugget kriging reproduces samples exactly") {
  const auto pts = scattered(80, 3, 40.0);
  const VariogramModel m{VariogramKind::exponential, 0.0, 900.0, 0.5};
  std::vector<Location> at;
  for (const auto& p : pts) at.push_back({p.x, p.y});
  const auto pred = krige_predict(pts, m, at);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(std::abs(pred[i].value - pts[i].value) <= 1e-8);
    CHECK(std::abs(pred[i].variance) <= 1e-8);
  }
}

TEST_CASE("a single sample is returned everywhere") {
  const std::vector<SpatialPoint> one{{0.3, 0.4, 12.5}};
  const OrdinaryKriging ok(one, VariogramModel{VariogramKind::spherical, 0.0, 1.0, 1.0});
  const auto s = ok.solve({5.0, -2.0});
  REQUIRE(s.weights.size() == 1);
  CHECK(s.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.value == doctest::Approx(12.5).epsilon(1e-14));
}

TEST_CASE("three-sample system matches a dense solve") {
  const std::vector<SpatialPoint> pts{{0.0, 0.0, 1.0}, {1.0, 0.2, 3.0}, {0.3, 0.9, -2.0}};
  const Location target{0.45, 0.35};
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential, VariogramKind::gaussian}) {
    const VariogramModel m{kind, 0.1, 2.0, 1.5};
    std::vector<std::vector<double>> a(4, std::vector<double>(4, 1.0));
    std::vector<double> b(4, 1.0);
    a[3][3] = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) a[i][j] = m(dist(pts[i].x, pts[i].y, pts[j].x, pts[j].y));
      b[i] = m(dist(pts[i].x, pts[i].y, target.x, target.y));
    }
    const auto sol = oracle::solve(a, b);
    double value = 0.0, var = sol[3];
    for (std::size_t i = 0; i < 3; ++i) {
      value += sol[i] * pts[i].value;
      var += sol[i] * b[i];
    }
    const auto s = OrdinaryKriging(pts, m).solve(target);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s.weights[i] - sol[i]) <= 1e-9);
    CHECK(std::abs(s.lagrange - sol[3]) <= 1e-9);
    CHECK(std::abs(s.value - value) <= 1e-9);
    CHECK(std::abs(s.variance - var) <= 1e-9);
  }
}

TEST_CASE("a constant field is reproduced exactly") {
  auto pts = scattered(50, 4);
  for (auto& p : pts) p.value = 42.0;
  Rng rng(5);
  std::vector<Location> targets;
  for (int i = 0; i < 100; ++i) targets.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  const VariogramModel m{VariogramKind::spherical, 0.0, 1.0, 0.3};
  for (const auto& p : krige_predict(pts, m, targets)) CHECK(p.value == doctest::Approx(42.0).epsilon(1e-12));
  for (const auto& p : krige_predict_local(pts, m, targets, 8)) CHECK(p.value == doctest::Approx(42.0).epsilon(1e-12));
  // A flat fitted variogram (all zero) still yields the constant.
  const VariogramModel zero{VariogramKind::spherical, 0.0, 0.0, 1.0};
  for (const auto& p : krige_predict(pts, zero, targets)) CHECK(p.value == doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("local kriging with enough neighbours equals global kriging") {
  const auto pts = scattered(40, 6);
  const VariogramModel m{VariogramKind::gaussian, 0.02, 1.0, 0.5};
  Rng rng(7);
  std::vector<Location> targets;
  for (int i = 0; i < 50; ++i) targets.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  const auto g = krige_predict(pts, m, targets);
  const auto l = krige_predict_local(pts, m, targets, 40);
  const auto l2 = krige_predict_local(pts, m, targets, 400);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(l[i].value == doctest::Approx(g[i].value).epsilon(1e-10));
    CHECK(l2[i].value == doctest::Approx(g[i].value).epsilon(1e-10));
    CHECK(l[i].variance == doctest::Approx(g[i].variance).epsilon(1e-8));
  }
}

TEST_CASE("serial and parallel kriging agree bit for bit") {
  const auto pts = scattered(100, 8);
  const VariogramModel m{VariogramKind::spherical, 0.01, 1.0, 0.4};
  Rng rng(9);
  std::vector<Location> targets;
  for (int i = 0; i < 300; ++i) targets.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  const auto a = krige_predict(pts, m, targets, Execution::serial);
  const auto b = krige_predict(pts, m, targets, Execution::parallel);
  const auto c = krige_predict_local(pts, m, targets, 16, Execution::serial);
  const auto d = krige_predict_local(pts, m, targets, 16, Execution::parallel);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(c[i].value == d[i].value);
  }
}

TEST_CASE("duplicate sample locations are merged by averaging with a warning") {
  QuietLog log;
  const std::vector<SpatialPoint> pts{{0, 0, 1.0}, {1, 0, 2.0}, {0, 0, 3.0}, {0, 1, 5.0}};
  const auto merged = merge_duplicate_locations(pts);
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].value == 2.0);
  const OrdinaryKriging ok(pts, VariogramModel{VariogramKind::exponential, 0.0, 1.0, 2.0});
  CHECK(ok.samples().size() == 3);
  CHECK(ok.predict({0, 0}).value == doctest::Approx(2.0).epsilon(1e-10));
  CHECK_FALSE(log.warnings.empty());
}

TEST_CASE("fields on a large numeric scale krige correctly") {
  // Magnitudes like surface UV (~1e5) with small relative variation.
  auto pts = scattered(120, 10);
  for (auto& p : pts) p.value = 100000.0 + 5000.0 * p.value;
  const auto sel = kriging_grid_search(pts, std::vector<VariogramKind>{VariogramKind::spherical,
                                                                      VariogramKind::exponential,
                                                                      VariogramKind::gaussian},
                                       5, 3);
  for (const auto& r : sel.cv_rmse) CHECK(r.has_value());
  const OrdinaryKriging ok(pts, sel.model);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto s = ok.solve({pts[i].x + 0.01, pts[i].y});
    double sum = 0.0;
    for (double w : s.weights) sum += w;
    CHECK(std::abs(sum - 1.0) <= 1e-10);
    CHECK(std::abs(s.value - pts[i].value) < 5000.0);
  }
}

TEST_CASE("grid search selects spherical for spherical processes in most seeds") {
  QuietLog log;
  // The unit square spans several ranges, so one realization's empirical
  // variogram settles on the sill.
  const VariogramModel truth{VariogramKind::spherical, 0.0, 1.0, 0.15};
  const std::vector<VariogramKind> kinds{VariogramKind::spherical, VariogramKind::exponential,
                                         VariogramKind::gaussian};
  int spherical = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto pts = simulate(truth, 400, seed);
    const auto sel = kriging_grid_search(pts, kinds, 5, seed);
    spherical += sel.kind == VariogramKind::spherical ? 1 : 0;
  }
  MESSAGE("spherical selected in " << spherical << " of 20 seeds");
  CHECK(spherical > 10);
}

TEST_CASE("grid search: single candidate and tie rule") {
  const auto pts = scattered(40, 11);
  const std::vector<VariogramKind> one{VariogramKind::gaussian};
  const auto sel = kriging_grid_search(pts, one, 4, 0);
  CHECK(sel.kind == VariogramKind::gaussian);
  REQUIRE(sel.cv_rmse.size() == 1);

  // Constant field: every kind scores the same RMSE, so the first wins.
  auto flat = pts;
  for (auto& p : flat) p.value = 1.0;
  const std::vector<VariogramKind> order{VariogramKind::exponential, VariogramKind::spherical};
  CHECK(kriging_grid_search(flat, order, 4, 0).kind == VariogramKind::exponential);
}
