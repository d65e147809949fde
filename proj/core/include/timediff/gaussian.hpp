#pragma once

#include <Eigen/Dense>

#include "timediff/schedule.hpp"

namespace timediff {

/// Numerical channels of one sample, rows = channels, cols = time steps.
using NumericMatrix = Eigen::MatrixXd;

/// Closed-form forward marginal: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
NumericMatrix q_sample(const NumericMatrix& x0, int t, const NumericMatrix& eps,
                       const DiffusionSchedule& schedule);

/// One step of the forward chain: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * z.
NumericMatrix q_step(const NumericMatrix& x_prev, int t, const NumericMatrix& z,
                     const DiffusionSchedule& schedule);

/// Reverse-process mean from an epsilon prediction:
/// (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t).
NumericMatrix posterior_mean(const NumericMatrix& xt, const NumericMatrix& predicted_eps, int t,
                             const DiffusionSchedule& schedule);

/// Ancestral step: posterior_mean + sqrt(posterior_var_t) * z. Callers pass
/// z = 0 at t = 1, where posterior_var is 0 anyway.
NumericMatrix p_sample_step(const NumericMatrix& xt, const NumericMatrix& predicted_eps, int t,
                            const NumericMatrix& z, const DiffusionSchedule& schedule);

/// Mean squared error between the injected and predicted noise.
double loss_numerical(const NumericMatrix& eps, const NumericMatrix& predicted_eps);

/// d loss_numerical / d predicted_eps.
NumericMatrix loss_numerical_grad(const NumericMatrix& eps, const NumericMatrix& predicted_eps);

}  // namespace timediff
