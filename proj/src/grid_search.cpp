#include "deepforest/grid_search.hpp"

#include <cmath>

#include "deepforest/data.hpp"
#include "deepforest/error.hpp"
#include "deepforest/log.hpp"
#include "deepforest/metrics.hpp"
#include "deepforest/rng.hpp"
#include "deepforest/text.hpp"

namespace deepforest {

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

ParamSet GridSpec::cell(std::size_t index) const {
  ParamSet p(axes.size());
  for (std::size_t i = axes.size(); i-- > 0;) {
    const auto& a = axes[i];
    p[i] = {a.name, a.values[index % a.values.size()]};
    index /= a.values.size();
  }
  return p;
}

void GridSpec::validate() const {
  if (folds < 2) throw UsageError("grid search needs at least 2 folds");
  for (const auto& a : axes) {
    if (a.values.empty()) throw UsageError("grid axis '" + a.name + "' has no candidates");
  }
}

FitPredict family_fit_predict(ModelFamily family, Execution exec) {
  return [family, exec](const Matrix& tx, std::span<const double> ty, const Matrix& vx, const ParamSet& params,
                        std::uint64_t seed) {
    const auto model = fit_model(family, params, tx, ty, seed, exec);
    return predict_model(model, vx, exec);
  };
}

GridSearchResult grid_search(const Matrix& x, std::span<const double> y, const FitPredict& fit_predict,
                             const GridSpec& grid, std::uint64_t seed) {
  grid.validate();
  if (y.size() != x.rows()) throw DataError("feature rows and target length differ");
  const auto folds = kfold_indices(x.rows(), grid.folds, seed);

  std::vector<Matrix> train_x, valid_x;
  std::vector<std::vector<double>> train_y, valid_y;
  for (const auto& f : folds) {
    train_x.push_back(x.select_rows(f.train));
    valid_x.push_back(x.select_rows(f.valid));
    train_y.push_back(select(y, f.train));
    valid_y.push_back(select(y, f.valid));
  }

  GridSearchResult result;
  const std::size_t n_cells = grid.size();
  bool have_best = false;
  for (std::size_t c = 0; c < n_cells; ++c) {
    CvRow row;
    row.params = grid.cell(c);
    try {
      for (std::size_t k = 0; k < folds.size(); ++k) {
        const auto pred = fit_predict(train_x[k], train_y[k], valid_x[k], row.params, derive_seed(seed, k + 1));
        if (pred.size() != valid_y[k].size()) throw NumericalError("prediction count mismatch");
        for (double p : pred) {
          if (!std::isfinite(p)) throw NumericalError("non-finite prediction");
        }
        // Single-row folds cannot use compute_metrics (n >= 2).
        double sq = 0.0, ab = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const double r = valid_y[k][i] - pred[i];
          sq += r * r;
          ab += std::abs(r);
        }
        const auto m = static_cast<double>(pred.size());
        row.fold_scores.push_back(grid.scoring == Scoring::rmse ? std::sqrt(sq / m) : ab / m);
      }
      double sum = 0.0;
      for (double s : row.fold_scores) sum += s;
      row.mean_score = sum / static_cast<double>(row.fold_scores.size());
    } catch (const std::exception& e) {
      row.valid = false;
      row.error = e.what();
      row.fold_scores.clear();
      log_warning("grid search: configuration [" + format_params(row.params) + "] failed: " + e.what());
    }
    if (row.valid && (!have_best || row.mean_score < result.table[result.best_index].mean_score)) {
      result.best_index = c;
      have_best = true;
    }
    result.table.push_back(std::move(row));
  }
  if (!have_best) throw NumericalError("grid search: every configuration failed");
  result.best = result.table[result.best_index].params;
  return result;
}

std::string cv_table_csv(const GridSpec& grid, const GridSearchResult& result) {
  const std::string metric = grid.scoring == Scoring::rmse ? "rmse" : "mae";
  std::string out;
  for (const auto& a : grid.axes) out += a.name + ",";
  for (std::size_t k = 0; k < grid.folds; ++k) out += "fold" + std::to_string(k + 1) + "_" + metric + ",";
  out += "mean_" + metric + ",status\n";
  for (const auto& row : result.table) {
    for (const auto& [name, value] : row.params) out += value + ",";
    for (std::size_t k = 0; k < grid.folds; ++k) {
      if (k < row.fold_scores.size()) out += text::format_double(row.fold_scores[k]);
      out += ",";
    }
    if (row.valid) out += text::format_double(row.mean_score);
    out += row.valid ? ",ok\n" : ",invalid\n";
  }
  return out;
}

}  // namespace deepforest
