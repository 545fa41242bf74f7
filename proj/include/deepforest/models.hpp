#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "deepforest/cascade.hpp"
#include "deepforest/execution.hpp"
#include "deepforest/forest.hpp"
#include "deepforest/linear.hpp"
#include "deepforest/matrix.hpp"

namespace deepforest {

enum class ModelFamily { linear, random_forest, extra_trees, cascade };

std::string to_string(ModelFamily family);
ModelFamily parse_model_family(const std::string& text);

// Named hyperparameter values, kept as text so that grids can mix numbers and
// keywords (max_features = sqrt, n_layers = auto).
using ParamSet = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> find_param(const ParamSet& params, const std::string& name);
// Overrides existing entries, appends new ones.
ParamSet merge_params(ParamSet base, const ParamSet& overrides);
std::string format_params(const ParamSet& params);

// Tuned defaults: random forest 500 trees / depth 10 / max_features 0.5;
// extra trees 1000 trees / depth 10 / max_features 0.8; cascade 2 layers of
// 2 RF + 2 ET with 2000 fully grown trees on sqrt(d) features.
ParamSet default_params(ModelFamily family);

// Recognised parameter names per family; anything else is a UsageError.
//   random_forest / extra_trees: n_trees, max_depth (-1 = unlimited),
//     min_samples_leaf, max_features (all | sqrt | fraction | count:k)
//   cascade: n_layers (integer | auto), n_rf, n_et, n_trees, max_depth,
//     min_samples_leaf, max_features, augmentation (out_of_fold | in_sample),
//     folds, auto_tolerance, max_auto_layers
ForestConfig forest_config_from(ModelFamily family, const ParamSet& params);
CascadeConfig cascade_config_from(const ParamSet& params, std::uint64_t seed);

using FittedModel = std::variant<LinearModel, ForestEstimator, CascadeModel>;

FittedModel fit_model(ModelFamily family, const ParamSet& params, const Matrix& x,
                      std::span<const double> y, std::uint64_t seed,
                      Execution exec = Execution::parallel);

std::vector<double> predict_model(const FittedModel& model, const Matrix& x,
                                  Execution exec = Execution::parallel);

}  // namespace deepforest
