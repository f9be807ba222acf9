#pragma once

#include <cmath>
#include <limits>

#include "qhdboot/error.hpp"

namespace qhdboot {

/// Polynomial weight phi_lambda(x) = (1 + |x|)^lambda. It is >= 1, continuous,
/// minimal at 0 and non-decreasing in |x|; the weighted sup-norm ||f||_phi is
/// sup_x |f(x)| phi(x).
class WeightFunction {
 public:
  explicit WeightFunction(double lambda = 0.0) : lambda_(lambda) {
    require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
            "weight exponent lambda must be finite and >= 0");
  }

  double operator()(double x) const {
    if (lambda_ == 0.0) return 1.0;
    if (std::isinf(x)) return std::numeric_limits<double>::infinity();
    return std::pow(1.0 + std::abs(x), lambda_);
  }

  double lambda() const noexcept { return lambda_; }
  bool bounded() const noexcept { return lambda_ == 0.0; }

  /// Integral of 1/phi over the real line: 2/(lambda-1) for lambda > 1, else +inf.
  double inverse_integral() const noexcept {
    return lambda_ > 1.0 ? 2.0 / (lambda_ - 1.0) : std::numeric_limits<double>::infinity();
  }

 private:
  double lambda_;
};

}  // namespace qhdboot
