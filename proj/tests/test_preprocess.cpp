#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "deepforest/aqi.hpp"
#include "deepforest/error.hpp"
#include "deepforest/log.hpp"
#include "deepforest/preprocess.hpp"
#include "oracles.hpp"

using namespace deepforest;

namespace {

// Captures warnings for the duration of a scope.
struct WarningCapture {
  std::vector<std::string> messages;
  LogSink previous;
  WarningCapture() {
    previous = set_log_sink([this](LogLevel level, std::string_view m) {
      if (level == LogLevel::warning) messages.emplace_back(m);
    });
  }
  ~WarningCapture() { set_log_sink(previous); }
};

RasterGrid window_grid(const std::vector<std::optional<double>>& nine) {
  RasterGrid g(3, 3, 0.0, 0.0, 1.0, "AOD");
  for (std::size_t i = 0; i < 9; ++i) {
    if (nine[i]) g.set(i / 3, i % 3, *nine[i]);
  }
  return g;
}

double sample_std(const std::vector<double>& v) {
  const double m = oracle::mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("humidity correction examples") {
  CHECK(*correct_pm_humidity(50, 20) == 62.5);
  CHECK(*correct_pm_humidity(30, 0) == 30.0);
  CHECK(*correct_pm_humidity(10, 50) == 20.0);
  CHECK_FALSE(correct_pm_humidity(10, 100).has_value());
  CHECK_FALSE(correct_pm_humidity(10, 120).has_value());
  CHECK_FALSE(correct_pm_humidity(10, -1).has_value());
  CHECK_FALSE(correct_pm_humidity(-1, 10).has_value());
  CHECK_FALSE(correct_pm_humidity(std::nan(""), 10).has_value());
}

TEST_CASE("humidity correction is monotone in rh and never below the reading") {
  for (double pm : {0.5, 7.0, 80.0}) {
    double prev = *correct_pm_humidity(pm, 0.0);
    CHECK(prev == pm);
    for (double rh = 0.5; rh < 100.0; rh += 0.5) {
      const double v = *correct_pm_humidity(pm, rh);
      CHECK(v > prev);
      CHECK(v >= pm);
      prev = v;
    }
  }
}

TEST_CASE("daily average examples") {
  StationSeries s{"A", 35.7, 51.4, {}};
  const Date d1(2019, 1, 1), d2(2019, 1, 2), d3(2019, 1, 3);
  for (int h = 0; h < 24; ++h) s.readings.push_back({"", d1, 30.0, 40.0});
  for (int h = 0; h < 24; ++h) {
    std::optional<double> pm;
    if (h == 3) pm = 10.0;
    if (h == 9) pm = 20.0;
    s.readings.push_back({"", d2, pm, 50.0});
  }
  for (int h = 0; h < 24; ++h) s.readings.push_back({"", d3, std::nullopt, std::nullopt});

  const auto daily = daily_average(s);
  REQUIRE(daily.readings.size() == 3);
  CHECK(daily.readings[0].date == d1);
  CHECK(*daily.readings[0].pm25 == 30.0);
  CHECK(*daily.readings[0].rh_percent == 40.0);
  CHECK(*daily.readings[1].pm25 == 15.0);
  CHECK_FALSE(daily.readings[2].pm25.has_value());
  CHECK_FALSE(daily.readings[2].rh_percent.has_value());
  CHECK(daily.station_id == "A");
}

TEST_CASE("iqr filter examples") {
  const std::vector<double> same(7, 3.3);
  auto r = iqr_filter(same);
  CHECK(r.outliers.empty());
  CHECK(r.inliers.size() == 7);

  const std::vector<double> v{10, 12, 14, 16, 100};
  r = iqr_filter(v);
  // Hand computation: ranks 2 and 4 of the sorted list give Q1 = 12, Q3 = 16.
  CHECK(r.q1 == 12.0);
  CHECK(r.q3 == 16.0);
  CHECK(r.outliers == std::vector<std::size_t>{4});

  const std::vector<double> four{1, 2, 3, 4};
  r = iqr_filter(four);
  CHECK(r.outliers.empty());
  CHECK(r.q1 == 1.75);
  CHECK(r.q3 == 3.25);
}

TEST_CASE("iqr filter passes short lists through with a warning") {
  WarningCapture cap;
  const std::vector<double> v{1, 2, 1000};
  const auto r = iqr_filter(v);
  CHECK(r.passthrough);
  CHECK(r.inliers.size() == 3);
  CHECK(cap.messages.size() == 1);
}

TEST_CASE("iqr filter matches the quantile oracle on 50 random lists") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> len(4, 60);
    std::lognormal_distribution<double> val(3.0, 0.8);
    std::vector<double> v(static_cast<std::size_t>(len(gen)));
    for (auto& x : v) x = val(gen);
    if (trial % 5 == 0) v[0] = 1e4;  // make sure some lists have outliers

    const double q1 = oracle::quantile(v, 0.25);
    const double q3 = oracle::quantile(v, 0.75);
    const double iqr = q3 - q1;
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      (v[i] >= q1 - iqr && v[i] <= q3 + iqr ? in : out).push_back(i);
    }
    const auto r = iqr_filter(v);
    CHECK(r.q1 == doctest::Approx(q1).epsilon(1e-12));
    CHECK(r.q3 == doctest::Approx(q3).epsilon(1e-12));
    CHECK(r.inliers == in);
    CHECK(r.outliers == out);
    CHECK(r.inliers.size() + r.outliers.size() == v.size());
  }
}

TEST_CASE("iqr filter is idempotent on all-equal and symmetric inputs") {
  const std::vector<double> sym{-9, -3, -2, -1, 0, 1, 2, 3, 9};
  const auto r = iqr_filter(sym);
  std::vector<double> kept;
  for (auto i : r.inliers) kept.push_back(sym[i]);
  CHECK(iqr_filter(kept).outliers.empty());
  const std::vector<double> same(5, 1.0);
  CHECK(iqr_filter(same).outliers.empty());
}

TEST_CASE("iqr filter treats non-finite values as outliers") {
  const std::vector<double> v{1, 2, std::nan(""), 3, 4};
  const auto r = iqr_filter(v);
  CHECK(r.outliers == std::vector<std::size_t>{2});
}

TEST_CASE("nAOD examples") {
  CHECK(*normalize_aod_pblh(0.2, 500) == doctest::Approx(4.0e-4).epsilon(1e-15));
  CHECK(*normalize_aod_pblh(0.0, 500) == 0.0);
  CHECK(*normalize_aod_pblh(0.0555, 27.75) == doctest::Approx(2.0e-3).epsilon(1e-15));
  CHECK_FALSE(normalize_aod_pblh(0.2, 0.0).has_value());
  CHECK_FALSE(normalize_aod_pblh(0.2, -5.0).has_value());
}

TEST_CASE("sensor regression examples") {
  const std::vector<double> x{0.1, 0.2, 0.4, 0.7};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  const auto fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> flat(4, 0.3);
  const auto c = fit_line(x, flat);
  CHECK(c.slope == 0.0);
  CHECK(c.r2 == 0.0);

  CHECK_THROWS_AS(fit_line(flat, x), NumericalError);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}), NumericalError);
}

TEST_CASE("sensor regression r2 matches a Pearson oracle on noisy pairs") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 0.03);
  std::uniform_real_distribution<double> u(0.05, 0.8);
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> t, a;
  for (int i = 0; i < 200; ++i) {
    const double terra = u(gen);
    const double aqua = 0.9 * terra + 0.01 + noise(gen);
    pairs.emplace_back(terra, aqua);
    t.push_back(terra);
    a.push_back(aqua);
  }
  const auto reg = fit_sensor_regression(pairs);
  REQUIRE(reg.aqua_to_terra);
  REQUIRE(reg.terra_to_aqua);
  const double r2 = oracle::r2(t, a);
  CHECK(reg.aqua_to_terra->r2 == doctest::Approx(r2).epsilon(1e-9));
  CHECK(reg.terra_to_aqua->r2 == doctest::Approx(r2).epsilon(1e-9));
  // Directional fits are not inverses of one another.
  CHECK(reg.terra_to_aqua->slope * reg.aqua_to_terra->slope < 1.0);
}

TEST_CASE("sensor regression leaves a direction with a constant predictor empty") {
  WarningCapture cap;
  const std::vector<std::pair<double, double>> pairs{{0.1, 0.3}, {0.2, 0.3}, {0.3, 0.3}};
  const auto reg = fit_sensor_regression(pairs);
  CHECK(reg.terra_to_aqua.has_value());
  CHECK_FALSE(reg.aqua_to_terra.has_value());
}

TEST_CASE("merge examples") {
  SensorRegression identity;
  identity.aqua_to_terra = LinearFit{1.0, 0.0, 1.0};
  identity.terra_to_aqua = LinearFit{1.0, 0.0, 1.0};
  CHECK(*merge_daily_aod(0.2, 0.3, identity) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_FALSE(merge_daily_aod(std::nullopt, std::nullopt, identity).has_value());
  CHECK(*merge_daily_aod(0.2, std::nullopt, identity) == 0.2);
  CHECK(*merge_daily_aod(std::nullopt, 0.2, identity) == 0.2);

  SensorRegression shifted;
  shifted.aqua_to_terra = LinearFit{2.0, 0.1, 1.0};
  shifted.terra_to_aqua = LinearFit{0.5, 0.0, 1.0};
  CHECK(*merge_daily_aod(0.2, std::nullopt, shifted) == doctest::Approx((0.2 + 0.5) / 2));
  CHECK(*merge_daily_aod(std::nullopt, 0.4, shifted) == doctest::Approx((0.2 + 0.4) / 2));

  SensorRegression none;
  CHECK(*merge_daily_aod(0.3, std::nullopt, none) == 0.3);
}

TEST_CASE("merge is symmetric when both values are present") {
  SensorRegression fit;
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(gen), b = u(gen);
    CHECK(*merge_daily_aod(a, b, fit) == *merge_daily_aod(b, a, fit));
  }
}

TEST_CASE("window gate examples") {
  const auto all = extract_window(window_grid(std::vector<std::optional<double>>(9, 0.2)), CellIndex{1, 1});
  CHECK(all.status == WindowStatus::ok);
  CHECK(all.n_valid == 9);
  CHECK(*all.aod == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(*all.stdev == doctest::Approx(0.0));

  std::vector<std::optional<double>> two(9);
  two[0] = 0.2;
  two[4] = 0.3;
  const auto few = extract_window(window_grid(two), CellIndex{1, 1});
  CHECK(few.status == WindowStatus::too_few_valid);
  CHECK_FALSE(few.aod.has_value());
  CHECK(few.n_valid == 2);

  std::vector<std::optional<double>> spread(9);
  spread[1] = 0.1;
  spread[5] = 0.1;
  spread[8] = 1.2;
  const auto wide = extract_window(window_grid(spread), CellIndex{1, 1});
  CHECK(wide.status == WindowStatus::too_dispersed);
  CHECK_FALSE(wide.aod.has_value());
  CHECK(*wide.stdev == doctest::Approx(0.635).epsilon(1e-3));
  CHECK(*wide.stdev == doctest::Approx(sample_std({0.1, 0.1, 1.2})).epsilon(1e-14));
}

TEST_CASE("window statistics use exactly the valid cells") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  std::bernoulli_distribution keep(0.7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::optional<double>> nine(9);
    std::vector<double> valid;
    for (auto& c : nine) {
      if (keep(gen)) {
        c = u(gen);
        valid.push_back(*c);
      }
    }
    auto grid = window_grid(nine);
    for (std::size_t i = 0; i < 9; ++i) {
      if (!nine[i]) grid.set_missing(i / 3, i % 3);
    }
    const auto w = extract_window(grid, CellIndex{1, 1});
    CHECK(w.n_valid == valid.size());
    if (valid.size() >= 2) {
      REQUIRE(w.stdev);
      CHECK(*w.stdev == doctest::Approx(sample_std(valid)).epsilon(1e-12));
    }
    if (valid.size() >= 3 && sample_std(valid) < 0.5) {
      REQUIRE(w.aod);
      CHECK(*w.aod == doctest::Approx(oracle::mean(valid)).epsilon(1e-12));
    } else {
      CHECK_FALSE(w.aod.has_value());
    }
  }
}

TEST_CASE("window at the grid edge counts outside cells as missing") {
  const auto g = window_grid(std::vector<std::optional<double>>(9, 0.4));
  const auto corner = extract_window(g, CellIndex{0, 0});
  CHECK(corner.n_valid == 4);
  CHECK(corner.status == WindowStatus::ok);
}

TEST_CASE("window by coordinates picks the containing cell and rejects outside points") {
  RasterGrid g(5, 5, 51.0, 35.0, 0.01, "AOD");
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) g.set(r, c, static_cast<double>(r * 5 + c) * 0.01);
  }
  // Row 0 is the north edge, so lat 35.045 is in row 0 and lon 51.025 in column 2.
  const auto w = extract_window(g, 35.045, 51.025);
  CHECK(w.n_valid == 6);
  CHECK_THROWS_AS(extract_window(g, 36.0, 51.02), DataError);
}

TEST_CASE("uncertainty examples and QA codes") {
  std::array<QAFlags, 9> best;
  best.fill(qa_from_code(0));
  CHECK(compute_uncertainty(best) == 1.0);
  std::array<QAFlags, 9> none;
  none.fill(qa_from_code(3));
  CHECK(compute_uncertainty(none) == 0.0);
  auto four = none;
  for (int i = 0; i < 4; ++i) four[static_cast<std::size_t>(i * 2)] = qa_from_code(0);
  CHECK(compute_uncertainty(four) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));

  // Clear adjacency and possibly-cloudy both count as best.
  CHECK(best_quality({AdjacencyClass::clear, CloudClass::possibly_cloudy}));
  CHECK(best_quality({AdjacencyClass::normal, CloudClass::clear}));
  CHECK_FALSE(best_quality({AdjacencyClass::normal, CloudClass::other}));
  CHECK_FALSE(best_quality({AdjacencyClass::other, CloudClass::clear}));
  for (int code = 0; code < 4; ++code) CHECK(qa_code(qa_from_code(code)) == code);
  CHECK(best_quality(qa_from_code(0)));
  for (int code = 1; code < 4; ++code) CHECK_FALSE(best_quality(qa_from_code(code)));
}

TEST_CASE("uncertainty takes values in multiples of one ninth") {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> code(0, 3);
  RasterGrid qa(6, 6, 0.0, 0.0, 1.0, "QA");
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) qa.set(r, c, code(gen));
  }
  qa.set_missing(2, 2);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const double u = compute_uncertainty(qa, CellIndex{r, c});
      CHECK(u >= 0.0);
      CHECK(u <= 1.0);
      const double k = u * 9.0;
      CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-12));
      int count = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const auto rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= 6 || cc >= 6) continue;
          const auto v = qa.get(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          count += v && *v == 0.0 ? 1 : 0;
        }
      }
      CHECK(u == doctest::Approx(count / 9.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("strict QA mask keeps only best-quality cells") {
  RasterGrid aod(2, 2, 0.0, 0.0, 1.0, "AOD");
  RasterGrid qa(2, 2, 0.0, 0.0, 1.0, "QA");
  aod.set(0, 0, 0.1);
  aod.set(0, 1, 0.2);
  aod.set(1, 0, 0.3);
  qa.set(0, 0, 0);
  qa.set(0, 1, 2);
  qa.set(1, 1, 0);
  const auto m = mask_non_best(aod, qa);
  CHECK(*m.get(0, 0) == 0.1);
  CHECK(m.missing(0, 1));
  CHECK(m.missing(1, 0));  // QA missing
  CHECK(m.missing(1, 1));  // AOD missing
}

TEST_CASE("AQI boundary probes cover all six categories") {
  const std::vector<std::pair<double, std::size_t>> probes{
      {12.0, 0}, {12.1, 1}, {35.4, 1}, {35.5, 2}, {55.4, 2},
      {55.5, 3}, {150.4, 3}, {150.5, 4}, {250.4, 4}, {250.5, 5}};
  std::vector<bool> seen(6, false);
  for (const auto& [pm, cat] : probes) {
    const auto c = classify_aqi(pm);
    CHECK(c.category == cat);
    CHECK_FALSE(c.out_of_table);
    seen[c.category] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  CHECK(classify_aqi(10).info().label == "Good");
  CHECK(classify_aqi(40).info().label == "Unhealthy for Sensitive Groups");
  CHECK(classify_aqi(60).info().label == "Unhealthy");
  CHECK(classify_aqi(12.04).category == 0);
  CHECK(classify_aqi(12.06).category == 1);
  CHECK(classify_aqi(0.0).category == 0);
  const auto high = classify_aqi(900);
  CHECK(high.category == 5);
  CHECK(high.out_of_table);
  CHECK_THROWS_AS(classify_aqi(-1), UsageError);
  CHECK_THROWS_AS(classify_aqi(std::nan("")), UsageError);
}
