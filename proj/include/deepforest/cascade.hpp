#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deepforest/execution.hpp"
#include "deepforest/forest.hpp"
#include "deepforest/matrix.hpp"

namespace deepforest {

enum class AugmentationMode {
  out_of_fold,  // augmentation columns from k-fold out-of-fold predictions
  in_sample,    // augmentation columns from the full-fit estimators
};

struct CascadeConfig {
  // Number of augmenting layers before the head. nullopt grows layers until
  // the k-fold validation RMSE stops improving by more than auto_tolerance.
  std::optional<std::size_t> n_layers = 2;
  std::size_t max_auto_layers = 8;
  double auto_tolerance = 1e-3;

  std::size_t n_random_forests = 2;
  std::size_t n_extra_trees = 2;
  std::size_t trees_per_estimator = 2000;
  // Fully grown trees on sqrt(d) candidate features.
  TreeConfig tree{-1, 1, MaxFeatures::sqrt(), SplitMode::best_of_subset};

  AugmentationMode augmentation = AugmentationMode::out_of_fold;
  std::size_t augmentation_folds = 5;
  std::uint64_t seed = 0;

  std::size_t estimators_per_layer() const { return n_random_forests + n_extra_trees; }
  // Estimator e of a layer: random forests first, then extra trees.
  ForestConfig estimator_config(std::size_t e) const;
  void validate() const;

  bool operator==(const CascadeConfig&) const = default;
};

struct CascadeModel {
  CascadeConfig config;
  std::size_t n_inputs = 0;
  // layers[j][e]: estimator e of augmenting layer j (fitted on all rows).
  std::vector<std::vector<ForestEstimator>> layers;
  std::vector<ForestEstimator> head;
  // Validation RMSE recorded for each kept layer (auto growth; out_of_fold).
  std::vector<double> layer_validation_rmse;

  // Width of the matrix entering layer j (0-based); j == layers.size() is the head.
  std::size_t input_width(std::size_t layer) const {
    return n_inputs + layer * config.estimators_per_layer();
  }

  bool operator==(const CascadeModel&) const = default;
};

// Carried columns first, then the new estimator outputs in estimator order.
Matrix augment(const Matrix& layer_outputs, const Matrix& carried);

CascadeModel fit_cascade(const Matrix& x, std::span<const double> y, const CascadeConfig& cfg,
                         Execution exec = Execution::parallel);

std::vector<double> predict_cascade(const CascadeModel& model, const Matrix& x,
                                    Execution exec = Execution::parallel);

// Feature matrix entering the head for the given inputs (all augmenting
// layers applied with full-fit estimator predictions).
Matrix cascade_head_features(const CascadeModel& model, const Matrix& x,
                             Execution exec = Execution::parallel);

// One column per head estimator: the values the final average is taken over.
Matrix cascade_head_outputs(const CascadeModel& model, const Matrix& x,
                            Execution exec = Execution::parallel);

}  // namespace deepforest
