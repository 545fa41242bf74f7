#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepforest/execution.hpp"
#include "deepforest/matrix.hpp"
#include "deepforest/tree.hpp"

namespace deepforest {

enum class ForestKind { random_forest, extra_trees };

std::string to_string(ForestKind kind);
ForestKind parse_forest_kind(const std::string& text);

struct ForestConfig {
  ForestKind kind = ForestKind::random_forest;
  std::size_t n_trees = 100;
  // split_mode is overridden by kind: random forests scan best splits,
  // extra trees draw random thresholds.
  TreeConfig tree;
  bool bootstrap = true;

  // Bootstrap on, best-of-subset splits.
  static ForestConfig random_forest(std::size_t n_trees, TreeConfig tree = {});
  // Bootstrap off, random-threshold splits.
  static ForestConfig extra_trees(std::size_t n_trees, TreeConfig tree = {});

  TreeConfig effective_tree() const;
  void validate() const;
  bool operator==(const ForestConfig&) const = default;
};

struct ForestEstimator {
  ForestConfig config;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  std::size_t n_features() const { return trees.empty() ? 0 : trees.front().n_features(); }
  double predict(std::span<const double> x) const;
  bool operator==(const ForestEstimator&) const = default;
};

// Per-tree stream: seeded from (seed, tree index) so that training order
// cannot influence the result.
Rng tree_rng(std::uint64_t seed, std::size_t tree_index);

// n row indices drawn uniformly with replacement.
std::vector<std::uint32_t> bootstrap_sample(std::size_t n, Rng& rng);

// Trees are independent, so Execution::parallel distributes them over
// threads and yields a forest identical to the serial loop.
ForestEstimator fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& cfg,
                           std::uint64_t seed, Execution exec = Execution::parallel);

// Row-wise mean of member-tree predictions, summed in tree order.
std::vector<double> predict_forest(const ForestEstimator& forest, const Matrix& x,
                                   Execution exec = Execution::parallel);

}  // namespace deepforest
