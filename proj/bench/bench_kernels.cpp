// Serial reference vs OpenMP kernels: wall time and output equality.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "deepforest/execution.hpp"
#include "deepforest/forest.hpp"
#include "deepforest/kriging.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/synth.hpp"

using namespace deepforest;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   identical %s\n", name, serial, parallel,
              serial / parallel, same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t rows = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 5000;
  const std::size_t trees = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 100;
  std::printf("threads %d, openmp %s, rows %zu, trees %zu\n", max_threads(), openmp_enabled() ? "on" : "off", rows,
              trees);

  synth::BenchmarkOptions opt;
  opt.rows = rows;
  const auto data = synth::make_benchmark(opt);
  const Matrix x = data.features();
  const auto y = data.targets();

  bool ok = true;
  const TreeConfig tree{-1, 1, MaxFeatures::sqrt(), SplitMode::best_of_subset};
  for (const auto& cfg : {ForestConfig::random_forest(trees, tree), ForestConfig::extra_trees(trees, tree)}) {
    ForestEstimator fs, fp;
    const double ts = seconds([&] { fs = fit_forest(x, y, cfg, 42, Execution::serial); });
    const double tp = seconds([&] { fp = fit_forest(x, y, cfg, 42, Execution::parallel); });
    const bool same_fit = fs.trees == fp.trees;
    report(("fit " + to_string(cfg.kind)).c_str(), ts, tp, same_fit);

    std::vector<double> ps, pp;
    const double us = seconds([&] { ps = predict_forest(fs, x, Execution::serial); });
    const double up = seconds([&] { pp = predict_forest(fs, x, Execution::parallel); });
    report(("predict " + to_string(cfg.kind)).c_str(), us, up, ps == pp);
    ok = ok && same_fit && ps == pp;
  }

  Rng rng(7);
  std::vector<SpatialPoint> samples(400);
  for (auto& p : samples) {
    p.x = rng.uniform();
    p.y = rng.uniform();
    p.value = std::sin(4 * p.x) + std::cos(3 * p.y) + 0.05 * rng.normal();
  }
  std::vector<Location> targets(20000);
  for (auto& t : targets) t = {rng.uniform(), rng.uniform()};
  const VariogramModel model{VariogramKind::spherical, 0.01, 1.0, 0.6};
  std::vector<KrigingPrediction> ks, kp;
  const OrdinaryKriging krig(samples, model);
  const double gs = seconds([&] { ks = krig.predict(targets, Execution::serial); });
  const double gp = seconds([&] { kp = krig.predict(targets, Execution::parallel); });
  bool same = true;
  for (std::size_t i = 0; i < ks.size(); ++i) same = same && ks[i].value == kp[i].value && ks[i].variance == kp[i].variance;
  report("kriging global", gs, gp, same);
  ok = ok && same;

  const double ls = seconds([&] { ks = krige_predict_local(samples, model, targets, 48, Execution::serial); });
  const double lp = seconds([&] { kp = krige_predict_local(samples, model, targets, 48, Execution::parallel); });
  same = true;
  for (std::size_t i = 0; i < ks.size(); ++i) same = same && ks[i].value == kp[i].value && ks[i].variance == kp[i].variance;
  report("kriging local (k=48)", ls, lp, same);
  ok = ok && same;
  return ok ? 0 : 1;
}
