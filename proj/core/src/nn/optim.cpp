#include "timediff/nn/optim.hpp"

#include <cmath>

#include "timediff/error.hpp"

namespace timediff::nn {

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
  state_.first_moment = params.zeros_like();
  state_.second_moment = params.zeros_like();
}

void Adam::step(ParamStore& params, const ParamStore& grads) {
  require_same_layout(params, grads, "Adam::step");
  require_same_layout(params, state_.first_moment, "Adam::step");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) throw NumericalError("non-finite gradient in tensor '" + grads.name(i) + "'");
  }

  ++state_.step;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state_.first_moment[i].array();
    auto v = state_.second_moment[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    params[i].array() -= config_.learning_rate * (m / c1) / ((v / c2).sqrt() + config_.epsilon);
  }
}

Ema::Ema(const ParamStore& params, double decay) : decay_(decay), shadow_(params) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw InvalidArgument("EMA decay must lie in [0, 1]");
}

void Ema::update(const ParamStore& params) {
  require_same_layout(shadow_, params, "Ema::update");
  for (std::size_t i = 0; i < params.size(); ++i) {
    shadow_[i] = decay_ * shadow_[i] + (1.0 - decay_) * params[i];
  }
}

GradAccumulator::GradAccumulator(const ParamStore& layout, int period)
    : period_(period), buffer_(layout.zeros_like()) {
  if (period < 1) throw InvalidArgument("accumulation period must be >= 1");
}

bool GradAccumulator::accumulate_and_maybe_step(const ParamStore& grads, ParamStore& params, Adam& optimizer) {
  buffer_.add_scaled(grads, 1.0);
  if (++pending_ < period_) return false;
  buffer_.scale(1.0 / static_cast<double>(period_));
  pending_ = 0;
  try {
    optimizer.step(params, buffer_);
  } catch (...) {
    buffer_.set_zero();
    throw;
  }
  buffer_.set_zero();
  return true;
}

}  // namespace timediff::nn
