#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepforest/matrix.hpp"
#include "deepforest/rng.hpp"

namespace deepforest {

// How many candidate features a node draws.
struct MaxFeatures {
  enum class Rule { all, sqrt, fraction, count };
  Rule rule = Rule::all;
  double value = 1.0;  // fraction in (0, 1] or an absolute count

  static MaxFeatures all() { return {Rule::all, 1.0}; }
  static MaxFeatures sqrt() { return {Rule::sqrt, 0.0}; }
  static MaxFeatures fraction(double f) { return {Rule::fraction, f}; }
  static MaxFeatures count(std::size_t k) { return {Rule::count, static_cast<double>(k)}; }

  // Resolves to a count in [1, d]. sqrt -> floor(sqrt(d)); fraction -> floor(f * d).
  std::size_t resolve(std::size_t d) const;
  std::string to_string() const;
  static MaxFeatures parse(const std::string& text);

  bool operator==(const MaxFeatures&) const = default;
};

enum class SplitMode {
  best_of_subset,    // exhaustive midpoint scan over each candidate feature
  random_threshold,  // one uniform threshold per candidate feature
};

struct TreeConfig {
  int max_depth = -1;  // negative: unlimited
  std::size_t min_samples_leaf = 1;
  MaxFeatures max_features = MaxFeatures::all();
  SplitMode split_mode = SplitMode::best_of_subset;

  void validate() const;
  bool operator==(const TreeConfig&) const = default;
};

// Flat CART regression tree. Internal nodes route x[feature] <= threshold to
// `left`; leaves carry the mean training target routed to them.
class DecisionTree {
 public:
  struct Node {
    double value = 0.0;      // threshold (internal) or prediction (leaf)
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t n_samples = 0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  DecisionTree(std::size_t n_features, std::vector<Node> nodes);

  std::size_t n_features() const { return n_features_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  double predict(std::span<const double> x) const;

  // Checks child indices, acyclicity and that the root reaches every node.
  void validate() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t n_features_ = 0;
  std::vector<Node> nodes_;
};

// Column-major copy of a feature matrix; trees scan one feature at a time.
class FeatureColumns {
 public:
  FeatureColumns() = default;
  explicit FeatureColumns(const Matrix& x);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> column(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Grows a tree on the rows listed in `samples` (duplicates allowed, as in a
// bootstrap resample). Throws DataError on empty input or non-finite values.
DecisionTree fit_tree(const FeatureColumns& x, std::span<const double> y,
                      std::vector<std::uint32_t> samples, const TreeConfig& cfg, Rng& rng);

DecisionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeConfig& cfg, Rng& rng);

double predict_tree(const DecisionTree& tree, std::span<const double> x);

}  // namespace deepforest
