#pragma once

#include <span>
#include <string>
#include <vector>

#include "deepforest/matrix.hpp"

namespace deepforest {

// Multivariate linear regression baseline.
struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;
  bool operator==(const LinearModel&) const = default;
};

// Ordinary least squares with an intercept, solved by column-pivoted
// Householder QR. Needs n > d. A rank-deficient design throws
// NumericalError naming the dependent columns (`names`, when given, label
// the feature columns).
LinearModel fit_linear(const Matrix& x, std::span<const double> y,
                       std::span<const std::string> names = {});

}  // namespace deepforest
