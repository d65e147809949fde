#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace timediff::nn {

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return ((-x).exp() + 1.0).inverse(); }

/// tanh via the vectorised exp; Eigen's double tanh is scalar. Absolute
/// error stays within a few ulps of 1.
inline Eigen::ArrayXXd tanh(const Eigen::ArrayXXd& x) { return 2.0 * ((-2.0 * x).exp() + 1.0).inverse() - 1.0; }

/// Exact (erf-based) GELU.
inline Eigen::ArrayXXd gelu(const Eigen::ArrayXXd& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
}

inline Eigen::ArrayXXd gelu_grad(const Eigen::ArrayXXd& x) {
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return x.unaryExpr([inv_sqrt_2pi](double v) {
    return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
  });
}

inline Eigen::ArrayXXd silu(const Eigen::ArrayXXd& x) { return x * sigmoid(x); }

inline Eigen::ArrayXXd silu_grad(const Eigen::ArrayXXd& x) {
  const Eigen::ArrayXXd s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace timediff::nn
