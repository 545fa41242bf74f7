#include "deepforest/cascade.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "deepforest/data.hpp"
#include "deepforest/error.hpp"
#include "deepforest/log.hpp"
#include "deepforest/rng.hpp"

namespace deepforest {

namespace {

// Seed-stream tags.
constexpr std::uint64_t kLayerStream = 0x1a7e0000;
constexpr std::uint64_t kHeadStream = 0x4ead0000;
constexpr std::uint64_t kFoldStream = 0xf01d0000;

}  // namespace

ForestConfig CascadeConfig::estimator_config(std::size_t e) const {
  return e < n_random_forests ? ForestConfig::random_forest(trees_per_estimator, tree)
                              : ForestConfig::extra_trees(trees_per_estimator, tree);
}

void CascadeConfig::validate() const {
  if (estimators_per_layer() == 0) throw UsageError("cascade needs at least one estimator per layer");
  if (trees_per_estimator == 0) throw UsageError("cascade estimators need at least one tree");
  tree.validate();
  if (augmentation == AugmentationMode::out_of_fold && augmentation_folds < 2) {
    throw UsageError("out-of-fold augmentation needs at least 2 folds");
  }
  if (!n_layers) {
    if (augmentation != AugmentationMode::out_of_fold) {
      throw UsageError("automatic layer growth needs out-of-fold augmentation");
    }
    if (max_auto_layers == 0) throw UsageError("max_auto_layers must be >= 1");
    if (!(auto_tolerance >= 0.0)) throw UsageError("auto_tolerance must be >= 0");
  }
}

Matrix augment(const Matrix& layer_outputs, const Matrix& carried) {
  if (layer_outputs.cols() == 0) return carried;
  if (layer_outputs.rows() != carried.rows()) {
    throw DataError("augment: " + std::to_string(layer_outputs.rows()) + " estimator rows vs " +
                    std::to_string(carried.rows()) + " carried rows");
  }
  return hconcat(carried, layer_outputs);
}

CascadeModel fit_cascade(const Matrix& x, std::span<const double> y, const CascadeConfig& cfg,
                         Execution exec) {
  cfg.validate();
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("cannot fit a cascade on empty input");
  if (y.size() != n) throw DataError("feature rows and target length differ");
  if (cfg.augmentation == AugmentationMode::out_of_fold && n < cfg.augmentation_folds) {
    throw DataError("cascade needs at least " + std::to_string(cfg.augmentation_folds) +
                    " rows for out-of-fold augmentation, got " + std::to_string(n));
  }

  const std::size_t n_est = cfg.estimators_per_layer();
  CascadeModel model;
  model.config = cfg;
  model.n_inputs = x.cols();

  Matrix carried = x;
  const std::size_t layer_limit = cfg.n_layers.value_or(cfg.max_auto_layers);
  double previous_rmse = std::numeric_limits<double>::infinity();

  for (std::size_t j = 0; j < layer_limit; ++j) {
    std::vector<ForestEstimator> estimators;
    Matrix outputs(n, n_est);
    const auto folds = cfg.augmentation == AugmentationMode::out_of_fold
                           ? kfold_indices(n, cfg.augmentation_folds, derive_seed(cfg.seed, kFoldStream + j))
                           : std::vector<Fold>{};
    std::vector<Matrix> fold_train_x;
    std::vector<std::vector<double>> fold_train_y;
    std::vector<Matrix> fold_valid_x;
    for (const auto& fold : folds) {
      fold_train_x.push_back(carried.select_rows(fold.train));
      fold_train_y.push_back(select(y, fold.train));
      fold_valid_x.push_back(carried.select_rows(fold.valid));
    }

    for (std::size_t e = 0; e < n_est; ++e) {
      const auto ecfg = cfg.estimator_config(e);
      const std::uint64_t est_seed = derive_seed(cfg.seed, kLayerStream + j, e);
      estimators.push_back(fit_forest(carried, y, ecfg, est_seed, exec));
      if (folds.empty()) {
        const auto p = predict_forest(estimators.back(), carried, exec);
        for (std::size_t r = 0; r < n; ++r) outputs(r, e) = p[r];
        continue;
      }
      for (std::size_t k = 0; k < folds.size(); ++k) {
        const auto fold_model =
            fit_forest(fold_train_x[k], fold_train_y[k], ecfg, derive_seed(est_seed, k + 1), exec);
        const auto p = predict_forest(fold_model, fold_valid_x[k], exec);
        for (std::size_t i = 0; i < p.size(); ++i) outputs(folds[k].valid[i], e) = p[i];
      }
    }

    if (cfg.augmentation == AugmentationMode::out_of_fold) {
      double sse = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t e = 0; e < n_est; ++e) sum += outputs(r, e);
        const double resid = y[r] - sum / static_cast<double>(n_est);
        sse += resid * resid;
      }
      const double rmse = std::sqrt(sse / static_cast<double>(n));
      if (!cfg.n_layers && j > 0 && !(rmse < previous_rmse - cfg.auto_tolerance)) {
        log_info("cascade: layer " + std::to_string(j + 1) + " validation RMSE " + std::to_string(rmse) +
                 " does not improve on " + std::to_string(previous_rmse) + "; stopping");
        break;
      }
      model.layer_validation_rmse.push_back(rmse);
      previous_rmse = rmse;
    }
    model.layers.push_back(std::move(estimators));
    carried = augment(outputs, carried);
  }

  for (std::size_t e = 0; e < n_est; ++e) {
    model.head.push_back(
        fit_forest(carried, y, cfg.estimator_config(e), derive_seed(cfg.seed, kHeadStream, e), exec));
  }
  return model;
}

Matrix cascade_head_features(const CascadeModel& model, const Matrix& x, Execution exec) {
  if (x.cols() != model.n_inputs) {
    throw DataError("cascade expects " + std::to_string(model.n_inputs) + " features, got " +
                    std::to_string(x.cols()));
  }
  Matrix carried = x;
  for (const auto& layer : model.layers) {
    Matrix outputs(x.rows(), layer.size());
    for (std::size_t e = 0; e < layer.size(); ++e) {
      const auto p = predict_forest(layer[e], carried, exec);
      for (std::size_t r = 0; r < p.size(); ++r) outputs(r, e) = p[r];
    }
    carried = augment(outputs, carried);
  }
  return carried;
}

Matrix cascade_head_outputs(const CascadeModel& model, const Matrix& x, Execution exec) {
  const Matrix features = cascade_head_features(model, x, exec);
  Matrix outputs(x.rows(), model.head.size());
  for (std::size_t e = 0; e < model.head.size(); ++e) {
    const auto p = predict_forest(model.head[e], features, exec);
    for (std::size_t r = 0; r < p.size(); ++r) outputs(r, e) = p[r];
  }
  return outputs;
}

std::vector<double> predict_cascade(const CascadeModel& model, const Matrix& x, Execution exec) {
  if (model.head.empty()) throw DataError("cascade has no head estimators");
  const Matrix outputs = cascade_head_outputs(model, x, exec);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t e = 0; e < outputs.cols(); ++e) sum += outputs(r, e);
    out[r] = sum / static_cast<double>(outputs.cols());
  }
  return out;
}

}  // namespace deepforest
