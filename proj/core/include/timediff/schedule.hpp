#pragma once

#include <string>
#include <vector>

namespace timediff {

/// Variance schedule shared by the Gaussian and multinomial branches.
///
/// Steps are 1-based in every accessor (t = 1..T); storage is 0-based. The
/// boundary convention alpha_bar(0) = 1 is applied by `alpha_bar_prev`, which
/// makes posterior_var(1) = 0.
struct DiffusionSchedule {
  int total_steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_var;

  double beta_at(int t) const { return beta[static_cast<std::size_t>(t - 1)]; }
  double alpha_at(int t) const { return alpha[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar_prev(int t) const { return alpha_bar_at(t - 1); }
  double posterior_var_at(int t) const { return posterior_var[static_cast<std::size_t>(t - 1)]; }

  /// Throws InvalidArgument unless 1 <= t <= T.
  void check_step(int t) const;
};

/// Builds the schedule from per-step betas; alpha, alpha_bar and the
/// posterior variance are derived. Betas must lie in (0, 1).
DiffusionSchedule schedule_from_betas(std::vector<double> betas);

/// Cosine schedule: alpha_bar(t) = f(t)/f(0) with
/// f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2), s = 0.008, and each beta clipped
/// to at most 0.999. alpha_bar is then recomputed as the running product of
/// the clipped alphas so the cumulative identity holds exactly.
DiffusionSchedule cosine_schedule(int total_steps, double offset = 0.008, double max_beta = 0.999);

struct ScheduleViolation {
  int index;  // 1-based step, 0 for whole-schedule rules
  std::string rule;
  std::string detail;
};

/// Lists every broken schedule invariant. An empty result means the schedule
/// is usable.
std::vector<ScheduleViolation> validate(const DiffusionSchedule& schedule);

}  // namespace timediff
