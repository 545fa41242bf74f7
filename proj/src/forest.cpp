#include "deepforest/forest.hpp"

#include <cmath>
#include <numeric>

#include "deepforest/error.hpp"

namespace deepforest {

std::string to_string(ForestKind kind) {
  return kind == ForestKind::random_forest ? "random_forest" : "extra_trees";
}

ForestKind parse_forest_kind(const std::string& text) {
  if (text == "random_forest" || text == "rf") return ForestKind::random_forest;
  if (text == "extra_trees" || text == "et") return ForestKind::extra_trees;
  throw UsageError("unknown forest kind '" + text + "'");
}

ForestConfig ForestConfig::random_forest(std::size_t n_trees, TreeConfig tree) {
  ForestConfig c;
  c.kind = ForestKind::random_forest;
  c.n_trees = n_trees;
  c.tree = tree;
  c.tree.split_mode = SplitMode::best_of_subset;
  c.bootstrap = true;
  return c;
}

ForestConfig ForestConfig::extra_trees(std::size_t n_trees, TreeConfig tree) {
  ForestConfig c;
  c.kind = ForestKind::extra_trees;
  c.n_trees = n_trees;
  c.tree = tree;
  c.tree.split_mode = SplitMode::random_threshold;
  c.bootstrap = false;
  return c;
}

TreeConfig ForestConfig::effective_tree() const {
  TreeConfig t = tree;
  t.split_mode = kind == ForestKind::random_forest ? SplitMode::best_of_subset : SplitMode::random_threshold;
  return t;
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw UsageError("a forest needs at least one tree");
  tree.validate();
}

double ForestEstimator::predict(std::span<const double> x) const {
  if (trees.empty()) throw DataError("forest has no trees");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

Rng tree_rng(std::uint64_t seed, std::size_t tree_index) { return Rng(derive_seed(seed, tree_index)); }

std::vector<std::uint32_t> bootstrap_sample(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> out(n);
  for (auto& s : out) s = static_cast<std::uint32_t>(rng.below(n));
  return out;
}

ForestEstimator fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& cfg,
                           std::uint64_t seed, Execution exec) {
  cfg.validate();
  if (x.rows() == 0 || x.cols() == 0) throw DataError("cannot fit a forest on empty input");
  if (y.size() != x.rows()) throw DataError("feature rows and target length differ");
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("non-finite target value");
  }

  const FeatureColumns columns(x);
  const TreeConfig tree_cfg = cfg.effective_tree();
  ForestEstimator forest{cfg, seed, std::vector<DecisionTree>(cfg.n_trees)};
  for_each_index(cfg.n_trees, exec, [&](std::size_t t) {
    Rng rng = tree_rng(seed, t);
    std::vector<std::uint32_t> samples;
    if (cfg.bootstrap) {
      samples = bootstrap_sample(x.rows(), rng);
    } else {
      samples.resize(x.rows());
      std::iota(samples.begin(), samples.end(), std::uint32_t{0});
    }
    forest.trees[t] = fit_tree(columns, y, std::move(samples), tree_cfg, rng);
  });
  return forest;
}

std::vector<double> predict_forest(const ForestEstimator& forest, const Matrix& x, Execution exec) {
  if (forest.trees.empty()) throw DataError("forest has no trees");
  if (x.cols() != forest.n_features()) {
    throw DataError("forest expects " + std::to_string(forest.n_features()) + " features, got " +
                    std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for_each_index(x.rows(), exec, [&](std::size_t r) { out[r] = forest.predict(x.row(r)); });
  return out;
}

}  // namespace deepforest
