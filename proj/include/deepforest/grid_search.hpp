#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepforest/execution.hpp"
#include "deepforest/matrix.hpp"
#include "deepforest/models.hpp"

namespace deepforest {

struct GridAxis {
  std::string name;
  std::vector<std::string> values;
};

enum class Scoring { rmse, mae };

struct GridSpec {
  std::vector<GridAxis> axes;  // no axes: a single empty configuration
  std::size_t folds = 5;
  Scoring scoring = Scoring::rmse;

  std::size_t size() const;
  // Row-major over the axes in declaration order (last axis varies fastest).
  ParamSet cell(std::size_t index) const;
  void validate() const;
};

struct CvRow {
  ParamSet params;
  std::vector<double> fold_scores;  // one per fold, in fold order
  double mean_score = 0.0;
  bool valid = true;
  std::string error;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  ParamSet best;
  std::vector<CvRow> table;
};

// Fits on (train_x, train_y) and returns predictions for valid_x.
using FitPredict = std::function<std::vector<double>(const Matrix& train_x, std::span<const double> train_y,
                                                     const Matrix& valid_x, const ParamSet& params,
                                                     std::uint64_t seed)>;

FitPredict family_fit_predict(ModelFamily family, Execution exec = Execution::parallel);

// k-fold cross-validated score for every cell; every cell sees the same
// folds. The winner is the valid cell with the lowest mean score, ties going
// to the earliest cell. Fold failures invalidate the cell (logged). Throws
// NumericalError when no cell is valid.
GridSearchResult grid_search(const Matrix& x, std::span<const double> y, const FitPredict& fit_predict,
                             const GridSpec& grid, std::uint64_t seed);

// One row per configuration: axis values, per-fold score, mean, status.
std::string cv_table_csv(const GridSpec& grid, const GridSearchResult& result);

}  // namespace deepforest
