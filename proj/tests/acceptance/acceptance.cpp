// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deepforest/aqi.hpp"
#include "deepforest/cascade.hpp"
#include "deepforest/data.hpp"
#include "deepforest/execution.hpp"
#include "deepforest/forest.hpp"
#include "deepforest/kriging.hpp"
#include "deepforest/log.hpp"
#include "deepforest/metrics.hpp"
#include "deepforest/model_io.hpp"
#include "deepforest/models.hpp"
#include "deepforest/pipeline.hpp"
#include "deepforest/preprocess.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/synth.hpp"
#include "deepforest/tree.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace deepforest;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Criterion = std::function<void(Outcome&)>;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double held_out_r2(ModelFamily family, const ParamSet& params, const Dataset& train, const Dataset& test,
                   std::uint64_t seed) {
  const auto scaler = fit_scaler(train, true);
  const auto model = fit_model(family, merge_params(default_params(family), params),
                               scaler.transform(train.features()), scaler.transform_targets(train.targets()), seed);
  const auto pred = scaler.invert_targets(predict_model(model, scaler.transform(test.features())));
  return *compute_metrics(test.targets(), pred).r2;
}

void synthetic_benchmark(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synth::make_benchmark({20000, 42, 8.0});
  o.require(data.size() == 20000 && data.schema().size() == 14, "20k rows x 14 features");
  const auto [train, test] = split_train_test(data, 0.7, 42);
  const double lin = held_out_r2(ModelFamily::linear, {}, train, test, 42);
  const double rf = held_out_r2(ModelFamily::random_forest, {{"n_trees", "100"}}, train, test, 42);
  const double cas = held_out_r2(ModelFamily::cascade, {{"n_trees", "100"}}, train, test, 42);
  const double secs = seconds_since(t0);
  o.detail << "R2 linear " << lin << ", random forest " << rf << ", cascade " << cas << "; " << secs << " s";
  o.require(lin >= 0.55 && lin <= 0.60, "linear R2 in [0.55, 0.60]");
  o.require(cas >= rf - 0.02, "cascade >= RF - 0.02");
  o.require(rf >= lin + 0.05, "RF >= linear + 0.05");
  o.require(secs < 600.0, "runtime under 10 minutes");
}

void metrics(Outcome& o) {
  Rng rng(2024);
  double worst = 0.0;
  bool ordered = true, affine = true;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(1.0, 150.0);
      p[i] = y[i] + rng.normal() * 10.0;
    }
    const auto m = compute_metrics(y, p);
    worst = std::max({worst, std::abs(m.rmse - oracle::rmse(y, p)), std::abs(m.mae - oracle::mae(y, p)),
                      std::abs(*m.r2 - oracle::r2(y, p)), std::abs(*m.ape - oracle::ape(y, p))});
    ordered &= m.rmse >= m.mae;
    const double a = rng.uniform(-5.0, 5.0), b = rng.uniform(0.1, 10.0) * (rng.below(2) ? 1.0 : -1.0);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = a + b * p[i];
    affine &= std::abs(*compute_metrics(y, q).r2 - *m.r2) <= 1e-9;
  }
  o.detail << "max deviation from oracle " << worst;
  o.require(worst <= 1e-9, "oracle agreement to 1e-9");
  o.require(ordered, "RMSE >= MAE");
  o.require(affine, "R2 affine invariance");
}

void trees_and_forests(Outcome& o) {
  // Unique rows reproduce their targets.
  Rng data_rng(5);
  Matrix x(300, 4);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = data_rng.uniform(0.0, 1.0);
    y[i] = data_rng.normal();
  }
  Rng tr(1);
  const auto tree = fit_tree(x, y, TreeConfig{}, tr);
  bool exact = true;
  for (std::size_t i = 0; i < 300; ++i) exact &= tree.predict(x.row(i)) == y[i];
  o.require(exact, "fully grown tree reproduces targets");

  // Four-point fixture against an exhaustive midpoint scan.
  const auto x4 = Matrix::from_rows({{1}, {2}, {3}, {4}});
  const std::vector<double> y4{0, 0, 10, 10};
  double best_t = 0.0, best_sse = 1e300;
  for (double t : {1.5, 2.5, 3.5}) {
    std::vector<double> l, r;
    for (std::size_t i = 0; i < 4; ++i) (x4(i, 0) <= t ? l : r).push_back(y4[i]);
    if (oracle::sse(l) + oracle::sse(r) < best_sse) {
      best_sse = oracle::sse(l) + oracle::sse(r);
      best_t = t;
    }
  }
  Rng r4(0);
  const double thr = fit_tree(x4, y4, TreeConfig{}, r4).nodes()[0].value;
  o.detail << "4-point threshold " << thr;
  o.require(thr > 2.0 && thr < 3.0 && thr == best_t, "threshold in (2,3) equal to the scan");

  // Forest mean.
  const auto forest = fit_forest(x, y, ForestConfig::random_forest(25), 3);
  const auto fp = predict_forest(forest, x);
  double dev = 0.0;
  for (std::size_t i = 0; i < 300; ++i) {
    double s = 0.0;
    for (const auto& t : forest.trees) s += t.predict(x.row(i));
    dev = std::max(dev, std::abs(fp[i] - s / static_cast<double>(forest.trees.size())));
  }
  o.detail << ", forest mean deviation " << dev;
  o.require(dev <= 1e-12, "forest = mean of trees");

  // Bootstrap unique fraction.
  double frac = 0.0;
  for (std::size_t t = 0; t < 200; ++t) {
    auto rng = tree_rng(77, t);
    const auto idx = bootstrap_sample(1000, rng);
    frac += static_cast<double>(std::set<std::uint32_t>(idx.begin(), idx.end()).size()) / 1000.0;
  }
  frac /= 200.0;
  o.detail << ", bootstrap unique fraction " << frac;
  o.require(std::abs(frac - (1.0 - std::exp(-1.0))) <= 0.03, "bootstrap fraction 1 - 1/e +- 0.03");
}

void cascade(Outcome& o) {
  auto problem = [](std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.uniform(0.0, 1.0);
      y[i] = std::sin(5.0 * x(i, 0)) + x(i, d - 1) + 0.05 * rng.normal();
    }
    return std::pair{x, y};
  };
  CascadeConfig cfg;
  cfg.trees_per_estimator = 10;
  cfg.augmentation_folds = 3;
  bool widths = true;
  for (std::size_t d : {3u, 14u}) {
    const auto [x, y] = problem(80, d, d);
    cfg.n_layers = 3;
    const auto m = fit_cascade(x, y, cfg);
    for (std::size_t j = 1; j <= 3; ++j) {
      const std::size_t w = j < 3 ? m.layers[j][0].n_features() : m.head[0].n_features();
      widths &= w == d + 4 * j;
    }
  }
  o.require(widths, "width d + 4j for d in {3, 14}, j in {1, 2, 3}");

  const auto [x, y] = problem(100, 5, 1);
  cfg.n_layers = 2;
  const auto m = fit_cascade(x, y, cfg);
  const auto outs = cascade_head_outputs(m, x);
  const auto pred = predict_cascade(m, x);
  double dev = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t e = 0; e < outs.cols(); ++e) s += outs(r, e);
    dev = std::max(dev, std::abs(pred[r] - s / static_cast<double>(outs.cols())));
  }
  o.detail << "head mean deviation " << dev;
  o.require(dev <= 1e-12, "output = mean of head estimators");

  cfg.n_layers = 0;
  const auto zero = fit_cascade(x, y, cfg);
  const auto zp = predict_cascade(zero, x);
  double zdev = 0.0;
  std::vector<std::vector<double>> per;
  for (const auto& f : zero.head) per.push_back(predict_forest(f, x));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (const auto& p : per) s += p[r];
    zdev = std::max(zdev, std::abs(zp[r] - s / static_cast<double>(per.size())));
  }
  o.detail << ", 0-layer deviation " << zdev;
  o.require(zero.layers.empty() && zdev <= 1e-12, "0-layer = average of base forests");
}

void kriging(Outcome& o) {
  Rng rng(11);
  std::vector<SpatialPoint> pts;
  for (int i = 0; i < 60; ++i) {
    const double px = rng.uniform(0, 1), py = rng.uniform(0, 1);
    pts.push_back({px, py, std::sin(4 * px) + std::cos(3 * py)});
  }
  double sum_dev = 0.0;
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential, VariogramKind::gaussian}) {
    const OrdinaryKriging ok(pts, {kind, 0.05, 1.0, 0.4});
    for (int t = 0; t < 50; ++t) {
      const auto s = ok.solve({rng.uniform(0, 1), rng.uniform(0, 1)});
      double w = 0.0;
      for (double v : s.weights) w += v;
      sum_dev = std::max(sum_dev, std::abs(w - 1.0));
    }
  }
  o.detail << "weight-sum deviation " << sum_dev;
  o.require(sum_dev <= 1e-10, "weights sum to 1");

  double exact_dev = 0.0;
  std::vector<Location> at;
  for (const auto& p : pts) at.push_back({p.x, p.y});
  for (auto kind : {VariogramKind::spherical, VariogramKind::exponential}) {
    const auto pred = krige_predict(pts, {kind, 0.0, 1.0, 0.4}, at);
    for (std::size_t i = 0; i < pts.size(); ++i) exact_dev = std::max(exact_dev, std::abs(pred[i].value - pts[i].value));
  }
  o.detail << ", zero-nugget deviation " << exact_dev;
  o.require(exact_dev <= 1e-8, "zero-nugget exactness");

  const std::vector<SpatialPoint> three{{0.0, 0.0, 1.0}, {1.0, 0.2, 3.0}, {0.3, 0.9, -2.0}};
  const Location target{0.45, 0.35};
  const VariogramModel m{VariogramKind::spherical, 0.1, 2.0, 1.5};
  auto d = [](double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); };
  std::vector<std::vector<double>> a(4, std::vector<double>(4, 1.0));
  std::vector<double> b(4, 1.0);
  a[3][3] = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) a[i][j] = m(d(three[i].x, three[i].y, three[j].x, three[j].y));
    b[i] = m(d(three[i].x, three[i].y, target.x, target.y));
  }
  const auto sol = oracle::solve(a, b);
  const auto s = OrdinaryKriging(three, m).solve(target);
  double dense = std::abs(s.lagrange - sol[3]);
  for (std::size_t i = 0; i < 3; ++i) dense = std::max(dense, std::abs(s.weights[i] - sol[i]));
  o.detail << ", 3-sample deviation " << dense;
  o.require(dense <= 1e-9, "3-sample system matches dense oracle");

  auto flat = pts;
  for (auto& p : flat) p.value = 42.0;
  bool constant = true;
  for (const auto& p : krige_predict(flat, {VariogramKind::gaussian, 0.0, 1.0, 0.3}, at)) constant &= p.value == 42.0 || std::abs(p.value - 42.0) <= 1e-12;
  std::vector<Location> off;
  for (int t = 0; t < 50; ++t) off.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  for (const auto& p : krige_predict(flat, {VariogramKind::spherical, 0.0, 1.0, 0.3}, off)) constant &= std::abs(p.value - 42.0) <= 1e-12;
  o.require(constant, "constant field reproduced");
}

RasterGrid window_grid(const std::vector<std::optional<double>>& nine) {
  RasterGrid g(3, 3, 0.0, 0.0, 1.0);
  for (std::size_t i = 0; i < 9; ++i) {
    if (nine[i]) g.set(i / 3, i % 3, *nine[i]);
  }
  return g;
}

void preprocessing(Outcome& o) {
  o.require(*correct_pm_humidity(50, 20) == 62.5 && *correct_pm_humidity(30, 0) == 30.0 &&
                *correct_pm_humidity(10, 50) == 20.0 && !correct_pm_humidity(10, 100),
            "humidity correction examples");
  o.require(std::abs(*normalize_aod_pblh(0.2, 500) - 4.0e-4) <= 1e-15 && *normalize_aod_pblh(0.0, 500) == 0.0 &&
                !normalize_aod_pblh(0.2, 0.0),
            "nAOD examples");
  SensorRegression identity;
  identity.aqua_to_terra = LinearFit{1.0, 0.0, 1.0};
  identity.terra_to_aqua = LinearFit{1.0, 0.0, 1.0};
  o.require(std::abs(*merge_daily_aod(0.2, 0.3, identity) - 0.25) <= 1e-15 &&
                !merge_daily_aod(std::nullopt, std::nullopt, identity) &&
                *merge_daily_aod(0.2, std::nullopt, identity) == 0.2,
            "merge examples");
  std::array<QAFlags, 9> best, worst;
  best.fill(qa_from_code(0));
  worst.fill(qa_from_code(3));
  auto four = worst;
  for (std::size_t i = 0; i < 4; ++i) four[2 * i] = qa_from_code(0);
  o.require(compute_uncertainty(best) == 1.0 && compute_uncertainty(worst) == 0.0 &&
                std::abs(compute_uncertainty(four) - 4.0 / 9.0) <= 1e-15,
            "U examples");

  Rng rng(31);
  bool iqr_ok = true;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(4 + rng.below(60));
    for (auto& x : v) x = rng.below(5) == 0 ? rng.uniform(-200, 400) : rng.uniform(10, 60);
    const double q1 = oracle::quantile(v, 0.25), q3 = oracle::quantile(v, 0.75);
    const double lo = q1 - (q3 - q1), hi = q3 + (q3 - q1);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < lo || v[i] > hi) out.push_back(i);
    }
    const auto r = iqr_filter(v);
    iqr_ok &= std::abs(r.q1 - q1) <= 1e-12 * std::max(1.0, std::abs(q1)) &&
              std::abs(r.q3 - q3) <= 1e-12 * std::max(1.0, std::abs(q3)) && r.outliers == out;
  }
  o.require(iqr_ok, "IQR matches oracle on 50 lists");

  const auto all = extract_window(window_grid(std::vector<std::optional<double>>(9, 0.2)), CellIndex{1, 1});
  std::vector<std::optional<double>> two(9), spread(9);
  two[0] = 0.2;
  two[4] = 0.3;
  spread[1] = 0.1;
  spread[5] = 0.1;
  spread[8] = 1.2;
  const auto few = extract_window(window_grid(two), CellIndex{1, 1});
  const auto wide = extract_window(window_grid(spread), CellIndex{1, 1});
  o.require(all.status == WindowStatus::ok && std::abs(*all.aod - 0.2) <= 1e-15 &&
                few.status == WindowStatus::too_few_valid && wide.status == WindowStatus::too_dispersed,
            "window gates");
  o.detail << "all examples checked";
}

struct RunOutput {
  std::vector<std::pair<std::string, std::string>> csv;
  std::vector<RasterGrid> rasters;
};

RunOutput full_run(const fs::path& dir, int threads) {
  set_num_threads(threads);
  synth::SceneOptions so;
  so.seed = 17;
  so.days = 8;
  so.rows = 24;
  so.cols = 30;
  synth::write_scene(dir.string(), synth::make_scene(so), so);
  auto cfg = PipelineConfig::load((dir / "pipeline.cfg").string());
  cfg.set("seed", "5");
  cfg.set("model.family", "cascade");
  cfg.set("model.n_trees", "12");
  cfg.set("model.folds", "3");
  cfg.set("grid.n_layers", "1,2");
  cfg.set("grid.folds", "3");
  const auto s = load_settings(cfg);

  RunOutput out;
  const auto prep = prepare(s);
  out.csv.emplace_back("dataset", dataset_to_csv(prep.dataset));
  out.csv.emplace_back("prepare_log", prep.log.str());
  out.csv.emplace_back("variograms", prep.variogram_csv);
  const auto tr = train(prep.dataset, s);
  out.csv.emplace_back("cv_table", tr.cv_table);
  out.csv.emplace_back("model", serialize_bundle(tr.bundle));
  const auto ev = evaluate(tr.bundle, tr.test);
  out.csv.emplace_back("predictions", predictions_csv(tr.test, ev));
  out.csv.emplace_back("metrics", metrics_csv(ev));
  for (const auto& d : s.dates()) {
    if (d.day_of_year() > 3) break;
    const auto m = predict_map(tr.bundle, s, d);
    out.csv.emplace_back("map " + d.to_string(), ascii_grid_to_string(m.filled));
    out.rasters.push_back(m.filled);
  }
  return out;
}

void determinism(Outcome& o) {
  const int before = max_threads();
  const auto a = full_run(oracle::temp_dir("acc_run_a"), 1);
  const auto b = full_run(oracle::temp_dir("acc_run_b"), 4);
  set_num_threads(before);
  bool same = a.csv.size() == b.csv.size();
  for (std::size_t i = 0; same && i < a.csv.size(); ++i) {
    if (a.csv[i].second != b.csv[i].second) {
      same = false;
      o.detail << "differs: " << a.csv[i].first << "; ";
    }
  }
  double dev = 0.0;
  bool shape = a.rasters.size() == b.rasters.size() && !a.rasters.empty();
  for (std::size_t k = 0; shape && k < a.rasters.size(); ++k) {
    shape &= a.rasters[k].aligned_with(b.rasters[k]);
    for (std::size_t r = 0; shape && r < a.rasters[k].rows(); ++r) {
      for (std::size_t c = 0; c < a.rasters[k].cols(); ++c) {
        const auto x = a.rasters[k].get(r, c), y = b.rasters[k].get(r, c);
        if (x.has_value() != y.has_value()) {
          shape = false;
          break;
        }
        if (x) dev = std::max(dev, std::abs(*x - *y));
      }
    }
  }
  o.detail << a.csv.size() << " outputs compared at 1 vs 4 threads, " << a.rasters.size()
           << " rasters, max cell difference " << dev;
  o.require(same, "byte-identical outputs");
  o.require(shape && dev <= 1e-12, "rasters equal to 1e-12");
}

void serialization(Outcome& o) {
  const auto data = synth::make_benchmark({400, 3, 8.0});
  const auto scaler = fit_scaler(data, true);
  const auto x = scaler.transform(data.features());
  const auto y = scaler.transform_targets(data.targets());
  Rng rng(8);
  Matrix probe(1000, 14);
  for (std::size_t i = 0; i < 1000; ++i) {
    for (std::size_t j = 0; j < 14; ++j) probe(i, j) = data.rows()[rng.below(400)].features[j] * rng.uniform(0.9, 1.1);
  }
  const std::vector<std::pair<ModelFamily, ParamSet>> models{
      {ModelFamily::linear, {}},
      {ModelFamily::random_forest, {{"n_trees", "20"}}},
      {ModelFamily::extra_trees, {{"n_trees", "20"}}},
      {ModelFamily::cascade, {{"n_trees", "8"}, {"folds", "3"}}}};
  for (const auto& [family, params] : models) {
    ModelBundle bundle;
    bundle.family = family;
    bundle.params = merge_params(default_params(family), params);
    bundle.seed = 4;
    bundle.schema = data.schema();
    bundle.scaler = scaler;
    bundle.model = fit_model(family, bundle.params, x, y, 4);
    const auto bytes = serialize_bundle(bundle);
    const auto back = deserialize_bundle(bytes);
    const auto p1 = bundle.predict(probe), p2 = back.predict(probe);
    const bool exact = p1.size() == p2.size() && std::memcmp(p1.data(), p2.data(), p1.size() * sizeof(double)) == 0;
    o.require(exact && serialize_bundle(back) == bytes, to_string(family) + " bit-exact");
    o.detail << to_string(family) << " " << bytes.size() << " B; ";
  }
  o.detail << "1000 probes each";
}

void aqi(Outcome& o) {
  const std::vector<std::pair<double, std::size_t>> probes{
      {12.0, 0}, {12.1, 1}, {35.4, 1}, {35.5, 2}, {55.4, 2},
      {55.5, 3}, {150.4, 3}, {150.5, 4}, {250.4, 4}, {250.5, 5}};
  std::set<std::size_t> seen;
  for (const auto& [pm, cat] : probes) {
    const auto c = classify_aqi(pm);
    o.require(c.category == cat, "probe " + std::to_string(pm));
    seen.insert(c.category);
  }
  o.detail << seen.size() << " categories covered";
  o.require(seen.size() == 6, "all six categories");
}

}  // namespace

int main() {
  set_log_sink([](LogLevel, std::string_view) {});
  const std::vector<std::pair<std::string, Criterion>> criteria{
      {"synthetic benchmark", synthetic_benchmark},
      {"metrics", metrics},
      {"trees and forests", trees_and_forests},
      {"cascade", cascade},
      {"kriging", kriging},
      {"preprocessing", preprocessing},
      {"determinism", determinism},
      {"serialization", serialization},
      {"AQI probes", aqi},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
