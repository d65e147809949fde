#include "timediff/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "timediff/error.hpp"

namespace timediff {

void DiffusionSchedule::check_step(int t) const {
  if (t < 1 || t > total_steps) {
    throw InvalidArgument("diffusion step " + std::to_string(t) + " outside [1, " +
                          std::to_string(total_steps) + "]");
  }
}

DiffusionSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw InvalidArgument("schedule needs at least one step");
  DiffusionSchedule s;
  s.total_steps = static_cast<int>(betas.size());
  s.beta = std::move(betas);
  const std::size_t n = s.beta.size();
  s.alpha.resize(n);
  s.alpha_bar.resize(n);
  s.posterior_var.resize(n);
  double running = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.alpha[i] = 1.0 - s.beta[i];
    const double prev = running;
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
    s.posterior_var[i] = (1.0 - prev) / (1.0 - running) * s.beta[i];
  }
  return s;
}

DiffusionSchedule cosine_schedule(int total_steps, double offset, double max_beta) {
  if (total_steps < 2) throw InvalidArgument("cosine_schedule requires T >= 2");
  const double T = total_steps;
  auto f = [&](double t) {
    const double c = std::cos((t / T + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> betas(static_cast<std::size_t>(total_steps));
  for (int t = 1; t <= total_steps; ++t) {
    const double b = 1.0 - f(t) / f(t - 1);
    betas[static_cast<std::size_t>(t - 1)] = std::min(b, max_beta);
  }
  return schedule_from_betas(std::move(betas));
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<ScheduleViolation> validate(const DiffusionSchedule& s) {
  std::vector<ScheduleViolation> out;
  const auto n = static_cast<std::size_t>(std::max(s.total_steps, 0));
  if (s.total_steps < 1 || s.beta.size() != n || s.alpha.size() != n || s.alpha_bar.size() != n ||
      s.posterior_var.size() != n) {
    out.push_back({0, "shape", "table lengths disagree with total_steps"});
    return out;
  }

  double product = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t = static_cast<int>(i) + 1;
    const double b = s.beta[i];
    if (!(b > 0.0 && b < 1.0)) out.push_back({t, "beta-range", "beta = " + fmt(b) + " not in (0,1)"});

    product *= s.alpha[i];
    const double stored = s.alpha_bar[i];
    if (!(std::abs(stored - product) <= 1e-12 * std::abs(product))) {
      out.push_back({t, "cumulative-product",
                     "alpha_bar = " + fmt(stored) + ", product of alphas = " + fmt(product)});
    }

    const double prev = i == 0 ? 1.0 : s.alpha_bar[i - 1];
    if (!(stored < prev)) {
      out.push_back({t, "monotone", "alpha_bar does not decrease: " + fmt(prev) + " -> " + fmt(stored)});
    }

    const double pv = s.posterior_var[i];
    if (!(pv >= 0.0 && pv <= b)) {
      out.push_back({t, "posterior-var", "posterior_var = " + fmt(pv) + " outside [0, beta]"});
    }
  }
  if (s.posterior_var[0] != 0.0) {
    out.push_back({1, "posterior-var", "posterior_var(1) must be 0 under alpha_bar(0) = 1"});
  }
  if (s.total_steps >= 100 && !(s.alpha_bar.back() < 0.01)) {
    out.push_back({s.total_steps, "terminal", "alpha_bar(T) = " + fmt(s.alpha_bar.back()) + " >= 0.01"});
  }
  return out;
}

}  // namespace timediff
