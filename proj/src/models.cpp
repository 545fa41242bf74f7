#include "deepforest/models.hpp"

#include <algorithm>

#include "deepforest/error.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::linear:
      return "linear";
    case ModelFamily::random_forest:
      return "random_forest";
    case ModelFamily::extra_trees:
      return "extra_trees";
    case ModelFamily::cascade:
      return "cascade";
  }
  return "linear";
}

ModelFamily parse_model_family(const std::string& text) {
  if (text == "linear" || text == "multivariate") return ModelFamily::linear;
  if (text == "random_forest" || text == "rf") return ModelFamily::random_forest;
  if (text == "extra_trees" || text == "et") return ModelFamily::extra_trees;
  if (text == "cascade" || text == "deep_forest") return ModelFamily::cascade;
  throw UsageError("unknown model family '" + text + "'");
}

std::optional<std::string> find_param(const ParamSet& params, const std::string& name) {
  for (const auto& [k, v] : params) {
    if (k == name) return v;
  }
  return std::nullopt;
}

ParamSet merge_params(ParamSet base, const ParamSet& overrides) {
  for (const auto& [k, v] : overrides) {
    auto it = std::find_if(base.begin(), base.end(), [&](const auto& p) { return p.first == k; });
    if (it != base.end()) {
      it->second = v;
    } else {
      base.emplace_back(k, v);
    }
  }
  return base;
}

std::string format_params(const ParamSet& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ' ';
    out += k + "=" + v;
  }
  return out.empty() ? "(none)" : out;
}

ParamSet default_params(ModelFamily family) {
  switch (family) {
    case ModelFamily::linear:
      return {};
    case ModelFamily::random_forest:
      return {{"n_trees", "500"}, {"max_depth", "10"}, {"max_features", "0.5"}, {"min_samples_leaf", "1"}};
    case ModelFamily::extra_trees:
      return {{"n_trees", "1000"}, {"max_depth", "10"}, {"max_features", "0.8"}, {"min_samples_leaf", "1"}};
    case ModelFamily::cascade:
      return {{"n_layers", "2"},       {"n_rf", "2"},           {"n_et", "2"},
              {"n_trees", "2000"},     {"max_depth", "-1"},     {"min_samples_leaf", "1"},
              {"max_features", "sqrt"}, {"augmentation", "out_of_fold"}, {"folds", "5"}};
  }
  return {};
}

namespace {

void check_names(const ParamSet& params, std::initializer_list<std::string_view> allowed,
                 const std::string& family) {
  for (const auto& [k, v] : params) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw UsageError("parameter '" + k + "' does not apply to " + family);
    }
  }
}

long long int_param(const ParamSet& params, const std::string& name, long long fallback) {
  const auto v = find_param(params, name);
  return v ? text::parse_int(*v, name) : fallback;
}

std::size_t count_param(const ParamSet& params, const std::string& name, long long fallback,
                        long long min_value) {
  const auto v = int_param(params, name, fallback);
  if (v < min_value) throw UsageError(name + " must be >= " + std::to_string(min_value));
  return static_cast<std::size_t>(v);
}

TreeConfig tree_config_from(const ParamSet& params, const TreeConfig& base) {
  TreeConfig t = base;
  t.max_depth = static_cast<int>(int_param(params, "max_depth", base.max_depth));
  t.min_samples_leaf = count_param(params, "min_samples_leaf", static_cast<long long>(base.min_samples_leaf), 1);
  if (auto mf = find_param(params, "max_features")) t.max_features = MaxFeatures::parse(*mf);
  t.validate();
  return t;
}

}  // namespace

ForestConfig forest_config_from(ModelFamily family, const ParamSet& params) {
  const auto name = to_string(family);
  check_names(params, {"n_trees", "max_depth", "min_samples_leaf", "max_features"}, name);
  const auto full = merge_params(default_params(family), params);
  const auto tree = tree_config_from(full, TreeConfig{});
  const auto n_trees = count_param(full, "n_trees", 100, 1);
  if (family == ModelFamily::random_forest) return ForestConfig::random_forest(n_trees, tree);
  if (family == ModelFamily::extra_trees) return ForestConfig::extra_trees(n_trees, tree);
  throw UsageError(name + " is not a forest family");
}

CascadeConfig cascade_config_from(const ParamSet& params, std::uint64_t seed) {
  check_names(params,
              {"n_layers", "n_rf", "n_et", "n_trees", "max_depth", "min_samples_leaf", "max_features",
               "augmentation", "folds", "auto_tolerance", "max_auto_layers"},
              "cascade");
  const auto full = merge_params(default_params(ModelFamily::cascade), params);
  CascadeConfig c;
  const auto layers = text::trim(*find_param(full, "n_layers"));
  if (layers == "auto") {
    c.n_layers = std::nullopt;
  } else {
    c.n_layers = count_param(full, "n_layers", 2, 0);
  }
  c.n_random_forests = count_param(full, "n_rf", 2, 0);
  c.n_extra_trees = count_param(full, "n_et", 2, 0);
  c.trees_per_estimator = count_param(full, "n_trees", 2000, 1);
  c.tree = tree_config_from(full, c.tree);
  const auto aug = text::trim(*find_param(full, "augmentation"));
  if (aug == "out_of_fold") {
    c.augmentation = AugmentationMode::out_of_fold;
  } else if (aug == "in_sample") {
    c.augmentation = AugmentationMode::in_sample;
  } else {
    throw UsageError("augmentation must be out_of_fold or in_sample");
  }
  c.augmentation_folds = count_param(full, "folds", 5, 2);
  if (auto tol = find_param(full, "auto_tolerance")) c.auto_tolerance = text::parse_double(*tol, "auto_tolerance");
  c.max_auto_layers = count_param(full, "max_auto_layers", static_cast<long long>(c.max_auto_layers), 1);
  c.seed = seed;
  c.validate();
  return c;
}

FittedModel fit_model(ModelFamily family, const ParamSet& params, const Matrix& x,
                      std::span<const double> y, std::uint64_t seed, Execution exec) {
  switch (family) {
    case ModelFamily::linear:
      check_names(params, {}, "linear");
      return fit_linear(x, y);
    case ModelFamily::random_forest:
    case ModelFamily::extra_trees:
      return fit_forest(x, y, forest_config_from(family, params), seed, exec);
    case ModelFamily::cascade:
      return fit_cascade(x, y, cascade_config_from(params, seed), exec);
  }
  throw UsageError("unknown model family");
}

std::vector<double> predict_model(const FittedModel& model, const Matrix& x, Execution exec) {
  struct Visitor {
    const Matrix& x;
    Execution exec;
    std::vector<double> operator()(const LinearModel& m) const { return m.predict(x); }
    std::vector<double> operator()(const ForestEstimator& m) const { return predict_forest(m, x, exec); }
    std::vector<double> operator()(const CascadeModel& m) const { return predict_cascade(m, x, exec); }
  };
  return std::visit(Visitor{x, exec}, model);
}

}  // namespace deepforest
