#include "timediff/gaussian.hpp"

#include <cmath>
#include <string>

#include "timediff/error.hpp"

namespace timediff {

namespace {

void require_same_shape(const NumericMatrix& a, const NumericMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

}  // namespace

NumericMatrix q_sample(const NumericMatrix& x0, int t, const NumericMatrix& eps,
                       const DiffusionSchedule& schedule) {
  require_same_shape(x0, eps, "q_sample");
  schedule.check_step(t);
  const double abar = schedule.alpha_bar_at(t);
  return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

NumericMatrix q_step(const NumericMatrix& x_prev, int t, const NumericMatrix& z,
                     const DiffusionSchedule& schedule) {
  require_same_shape(x_prev, z, "q_step");
  schedule.check_step(t);
  const double b = schedule.beta_at(t);
  return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * z;
}

NumericMatrix posterior_mean(const NumericMatrix& xt, const NumericMatrix& predicted_eps, int t,
                             const DiffusionSchedule& schedule) {
  require_same_shape(xt, predicted_eps, "posterior_mean");
  schedule.check_step(t);
  const double coef = schedule.beta_at(t) / std::sqrt(1.0 - schedule.alpha_bar_at(t));
  return (xt - coef * predicted_eps) / std::sqrt(schedule.alpha_at(t));
}

NumericMatrix p_sample_step(const NumericMatrix& xt, const NumericMatrix& predicted_eps, int t,
                            const NumericMatrix& z, const DiffusionSchedule& schedule) {
  require_same_shape(xt, z, "p_sample_step");
  NumericMatrix mean = posterior_mean(xt, predicted_eps, t, schedule);
  const double var = schedule.posterior_var_at(t);
  if (var > 0.0) mean += std::sqrt(var) * z;
  return mean;
}

double loss_numerical(const NumericMatrix& eps, const NumericMatrix& predicted_eps) {
  require_same_shape(eps, predicted_eps, "loss_numerical");
  if (eps.size() == 0) return 0.0;
  return (predicted_eps - eps).squaredNorm() / static_cast<double>(eps.size());
}

NumericMatrix loss_numerical_grad(const NumericMatrix& eps, const NumericMatrix& predicted_eps) {
  require_same_shape(eps, predicted_eps, "loss_numerical_grad");
  if (eps.size() == 0) return NumericMatrix::Zero(eps.rows(), eps.cols());
  return (2.0 / static_cast<double>(eps.size())) * (predicted_eps - eps);
}

}  // namespace timediff
