#include "deepforest/linear.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "deepforest/error.hpp"

namespace deepforest {

double LinearModel::predict(std::span<const double> x) const {
  if (x.size() != coefficients.size()) {
    throw DataError("linear model expects " + std::to_string(coefficients.size()) + " features, got " +
                    std::to_string(x.size()));
  }
  double v = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) v += coefficients[i] * x[i];
  return v;
}

std::vector<double> LinearModel::predict(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
  return out;
}

LinearModel fit_linear(const Matrix& x, std::span<const double> y, std::span<const std::string> names) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (y.size() != n) throw DataError("feature rows and target length differ");
  if (n <= d) {
    throw DataError("linear regression needs more rows (" + std::to_string(n) + ") than features (" +
                    std::to_string(d) + ")");
  }
  // Column 0 is the intercept; features are centred so that the intercept
  // column stays well conditioned against them.
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd b(n);
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    a(static_cast<Eigen::Index>(r), 0) = 1.0;
    for (std::size_t c = 0; c < d; ++c) {
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c + 1)) = x(r, c) - mean[c];
    }
    b(static_cast<Eigen::Index>(r)) = y[r];
  }
  if (!a.allFinite() || !b.allFinite()) throw DataError("non-finite values in linear regression input");

  // Scale columns to unit norm so the rank threshold is scale free.
  Eigen::VectorXd norms = a.colwise().norm();
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    if (norms(c) == 0.0) norms(c) = 1.0;
    a.col(c) /= norms(c);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    std::string which;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < a.cols(); ++k) {
      const auto col = static_cast<std::size_t>(perm(k));
      if (!which.empty()) which += ", ";
      if (col == 0) {
        which += "intercept";
      } else if (col - 1 < names.size()) {
        which += names[col - 1];
      } else {
        which += "column " + std::to_string(col - 1);
      }
    }
    throw NumericalError("linear regression design is rank deficient; collinear: " + which);
  }
  const Eigen::VectorXd beta = qr.solve(b);

  LinearModel model;
  model.coefficients.resize(d);
  double intercept = beta(0) / norms(0);
  for (std::size_t c = 0; c < d; ++c) {
    const double coef = beta(static_cast<Eigen::Index>(c + 1)) / norms(static_cast<Eigen::Index>(c + 1));
    model.coefficients[c] = coef;
    intercept -= coef * mean[c];
  }
  model.intercept = intercept;
  return model;
}

}  // namespace deepforest
