#include "deepforest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepforest/error.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

std::size_t MaxFeatures::resolve(std::size_t d) const {
  if (d == 0) return 0;
  double k = static_cast<double>(d);
  switch (rule) {
    case Rule::all:
      break;
    case Rule::sqrt:
      k = std::floor(std::sqrt(static_cast<double>(d)));
      break;
    case Rule::fraction:
      k = std::floor(value * static_cast<double>(d));
      break;
    case Rule::count:
      k = value;
      break;
  }
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, d);
}

std::string MaxFeatures::to_string() const {
  switch (rule) {
    case Rule::all:
      return "all";
    case Rule::sqrt:
      return "sqrt";
    case Rule::fraction:
      return text::format_double(value);
    case Rule::count:
      return "count:" + std::to_string(static_cast<long long>(value));
  }
  return "all";
}

MaxFeatures MaxFeatures::parse(const std::string& s) {
  const auto t = text::trim(s);
  if (t == "all") return all();
  if (t == "sqrt") return sqrt();
  if (t.starts_with("count:")) {
    const auto k = text::parse_int(t.substr(6), "max_features count");
    if (k < 1) throw UsageError("max_features count must be >= 1");
    return count(static_cast<std::size_t>(k));
  }
  const double f = text::parse_double(t, "max_features");
  if (!(f > 0.0 && f <= 1.0)) throw UsageError("max_features fraction must lie in (0, 1]");
  return fraction(f);
}

void TreeConfig::validate() const {
  if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
  if (max_features.rule == MaxFeatures::Rule::fraction &&
      !(max_features.value > 0.0 && max_features.value <= 1.0)) {
    throw UsageError("max_features fraction must lie in (0, 1]");
  }
  if (max_features.rule == MaxFeatures::Rule::count && max_features.value < 1.0) {
    throw UsageError("max_features count must be >= 1");
  }
}

DecisionTree::DecisionTree(std::size_t n_features, std::vector<Node> nodes)
    : n_features_(n_features), nodes_(std::move(nodes)) {}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children always follow their parent in the flat layout.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    deepest = std::max(deepest, level[i]);
    if (!n.is_leaf()) {
      level[static_cast<std::size_t>(n.left)] = level[i] + 1;
      level[static_cast<std::size_t>(n.right)] = level[i] + 1;
    }
  }
  return deepest;
}

double DecisionTree::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw DataError("tree expects " + std::to_string(n_features_) + " features, got " +
                    std::to_string(x.size()));
  }
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.value ? n.left : n.right);
  }
  return nodes_[i].value;
}

void DecisionTree::validate() const {
  if (nodes_.empty()) throw DataError("tree has no nodes");
  const auto n = static_cast<std::int64_t>(nodes_.size());
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.is_leaf()) continue;
    if (node.feature >= static_cast<std::int32_t>(n_features_)) {
      throw DataError("tree node references feature out of range");
    }
    for (auto child : {node.left, node.right}) {
      if (child <= static_cast<std::int64_t>(i) || child >= n) {
        throw DataError("tree node has an invalid child index");
      }
      ++parents[static_cast<std::size_t>(child)];
    }
  }
  if (parents[0] != 0) throw DataError("tree root has a parent");
  for (std::size_t i = 1; i < parents.size(); ++i) {
    if (parents[i] != 1) throw DataError("tree node is unreachable or shared");
  }
}

FeatureColumns::FeatureColumns(const Matrix& x) : rows_(x.rows()), cols_(x.cols()), data_(x.rows() * x.cols()) {
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) data_[c * rows_ + r] = x(r, c);
  }
}

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

struct XY {
  double x;
  double y;
};

// Splits with equal gain resolve to the lower feature index, then the lower
// threshold.
bool better(const Split& best, double gain, std::size_t feature, double threshold) {
  if (!best.found) return true;
  if (gain != best.gain) return gain > best.gain;
  if (feature != best.feature) return feature < best.feature;
  return threshold < best.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureColumns& x, std::span<const double> y, const TreeConfig& cfg, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), rng_(rng), features_(x.cols()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    mtry_ = cfg.max_features.resolve(x.cols());
  }

  DecisionTree build(std::vector<std::uint32_t> samples) {
    idx_ = std::move(samples);
    scratch_.reserve(idx_.size());
    struct Task {
      std::size_t begin, end;
      int depth;
      std::int32_t parent;
      bool is_left;
    };
    std::vector<Task> stack{{0, idx_.size(), 0, -1, false}};
    while (!stack.empty()) {
      const Task t = stack.back();
      stack.pop_back();
      const auto id = static_cast<std::int32_t>(nodes_.size());
      if (t.parent >= 0) {
        auto& p = nodes_[static_cast<std::size_t>(t.parent)];
        (t.is_left ? p.left : p.right) = id;
      }
      DecisionTree::Node node;
      node.n_samples = static_cast<std::uint32_t>(t.end - t.begin);

      const Split split = find_split(t.begin, t.end, t.depth);
      if (!split.found) {
        node.value = segment_mean(t.begin, t.end);
        nodes_.push_back(node);
        continue;
      }
      const auto col = x_.column(split.feature);
      const auto mid = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                      idx_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                      [&](std::uint32_t s) { return col[s] <= split.threshold; });
      const auto m = static_cast<std::size_t>(mid - idx_.begin());
      node.feature = static_cast<std::int32_t>(split.feature);
      node.value = split.threshold;
      nodes_.push_back(node);
      // Right pushed first so the left child directly follows its parent.
      stack.push_back({m, t.end, t.depth + 1, id, false});
      stack.push_back({t.begin, m, t.depth + 1, id, true});
    }
    return DecisionTree(x_.cols(), std::move(nodes_));
  }

 private:
  double segment_mean(std::size_t begin, std::size_t end) const {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += y_[idx_[i]];
    return sum / static_cast<double>(end - begin);
  }

  Split find_split(std::size_t begin, std::size_t end, int depth) {
    const std::size_t m = end - begin;
    const std::size_t msl = cfg_.min_samples_leaf;
    if (cfg_.max_depth >= 0 && depth >= cfg_.max_depth) return {};
    if (m < 2 * msl || m < 2) return {};

    double ymin = y_[idx_[begin]], ymax = ymin;
    const double mean = segment_mean(begin, end);
    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_[idx_[i]];
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
      sse += (v - mean) * (v - mean);
    }
    if (ymin == ymax) return {};
    // Gains below this are rounding noise, not variance reduction.
    const double min_gain = sse * 1e-12;

    Split best;
    std::size_t evaluated = 0;
    const std::size_t d = features_.size();
    for (std::size_t j = 0; j < d && evaluated < mtry_; ++j) {
      std::swap(features_[j], features_[j + rng_.below(d - j)]);
      const std::size_t f = features_[j];
      const auto col = x_.column(f);
      double xmin = col[idx_[begin]], xmax = xmin;
      for (std::size_t i = begin; i < end; ++i) {
        xmin = std::min(xmin, col[idx_[i]]);
        xmax = std::max(xmax, col[idx_[i]]);
      }
      if (xmin == xmax) continue;  // constant here; does not use up a draw
      ++evaluated;
      if (cfg_.split_mode == SplitMode::best_of_subset) {
        scan_best(begin, end, f, mean, min_gain, best);
      } else {
        scan_random(begin, end, f, mean, xmin, xmax, min_gain, best);
      }
    }
    return best;
  }

  void scan_best(std::size_t begin, std::size_t end, std::size_t f, double mean, double min_gain,
                 Split& best) {
    const auto col = x_.column(f);
    scratch_.clear();
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto s = idx_[i];
      scratch_.push_back({col[s], y_[s] - mean});
      total += y_[s] - mean;
    }
    std::sort(scratch_.begin(), scratch_.end(), [](const XY& a, const XY& b) { return a.x < b.x; });
    const std::size_t m = scratch_.size();
    const auto msl = cfg_.min_samples_leaf;
    const double parent = total * total / static_cast<double>(m);
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      left_sum += scratch_[i].y;
      if (scratch_[i].x == scratch_[i + 1].x) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = m - nl;
      if (nl < msl || nr < msl) continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(nl) +
                          right_sum * right_sum / static_cast<double>(nr) - parent;
      if (!(gain > min_gain)) continue;
      const double a = scratch_[i].x;
      const double b = scratch_[i + 1].x;
      double threshold = a / 2.0 + b / 2.0;
      if (!(threshold >= a && threshold < b)) threshold = a;
      if (better(best, gain, f, threshold)) best = {true, f, threshold, gain};
    }
  }

  void scan_random(std::size_t begin, std::size_t end, std::size_t f, double mean, double xmin,
                   double xmax, double min_gain, Split& best) {
    const auto col = x_.column(f);
    double u = rng_.uniform();
    while (u == 0.0) u = rng_.uniform();
    double threshold = xmin + u * (xmax - xmin);
    if (threshold >= xmax) threshold = std::nextafter(xmax, xmin);
    double total = 0.0, left_sum = 0.0;
    std::size_t nl = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto s = idx_[i];
      const double v = y_[s] - mean;
      total += v;
      if (col[s] <= threshold) {
        left_sum += v;
        ++nl;
      }
    }
    const std::size_t m = end - begin;
    const std::size_t nr = m - nl;
    if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) return;
    const double right_sum = total - left_sum;
    const double gain = left_sum * left_sum / static_cast<double>(nl) +
                        right_sum * right_sum / static_cast<double>(nr) -
                        total * total / static_cast<double>(m);
    if (!(gain > min_gain)) return;
    if (better(best, gain, f, threshold)) best = {true, f, threshold, gain};
  }

  const FeatureColumns& x_;
  std::span<const double> y_;
  const TreeConfig& cfg_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::size_t mtry_ = 1;
  std::vector<std::uint32_t> idx_;
  std::vector<XY> scratch_;
  std::vector<DecisionTree::Node> nodes_;
};

void check_inputs(const FeatureColumns& x, std::span<const double> y,
                  const std::vector<std::uint32_t>& samples) {
  if (samples.empty() || x.cols() == 0) throw DataError("cannot fit a tree on empty input");
  if (y.size() != x.rows()) throw DataError("feature rows and target length differ");
  for (auto s : samples) {
    if (s >= x.rows()) throw DataError("sample index out of range");
    if (!std::isfinite(y[s])) throw DataError("non-finite target value");
  }
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const auto col = x.column(c);
    for (auto s : samples) {
      if (!std::isfinite(col[s])) throw DataError("non-finite feature value");
    }
  }
}

}  // namespace

DecisionTree fit_tree(const FeatureColumns& x, std::span<const double> y,
                      std::vector<std::uint32_t> samples, const TreeConfig& cfg, Rng& rng) {
  cfg.validate();
  check_inputs(x, y, samples);
  return TreeBuilder(x, y, cfg, rng).build(std::move(samples));
}

DecisionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeConfig& cfg, Rng& rng) {
  std::vector<std::uint32_t> samples(x.rows());
  std::iota(samples.begin(), samples.end(), std::uint32_t{0});
  return fit_tree(FeatureColumns(x), y, std::move(samples), cfg, rng);
}

double predict_tree(const DecisionTree& tree, std::span<const double> x) { return tree.predict(x); }

}  // namespace deepforest
