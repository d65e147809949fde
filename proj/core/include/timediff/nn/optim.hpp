#pragma once

#include <cstdint>

#include "timediff/nn/param_store.hpp"

namespace timediff::nn {

struct AdamConfig {
  double learning_rate = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::int64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig config = {});

  /// Applies one update. Throws NumericalError naming the tensor if any
  /// gradient entry is non-finite; parameters are left untouched in that case.
  void step(ParamStore& params, const ParamStore& grads);

  const AdamConfig& config() const { return config_; }
  const OptimizerState& state() const { return state_; }
  OptimizerState& state() { return state_; }

 private:
  AdamConfig config_;
  OptimizerState state_;
};

/// Exponential moving average of parameters:
/// shadow = decay * shadow + (1 - decay) * param.
class Ema {
 public:
  Ema(const ParamStore& params, double decay = 0.995);

  void update(const ParamStore& params);
  double decay() const { return decay_; }
  const ParamStore& shadow() const { return shadow_; }
  ParamStore& shadow() { return shadow_; }

 private:
  double decay_;
  ParamStore shadow_;
};

/// Averages micro-batch gradients and steps the optimizer once every
/// `period` calls.
class GradAccumulator {
 public:
  GradAccumulator(const ParamStore& layout, int period = 2);

  /// Adds `grads` to the buffer. When `period` gradients have been buffered,
  /// applies their mean through `optimizer`, clears the buffer and returns true.
  bool accumulate_and_maybe_step(const ParamStore& grads, ParamStore& params, Adam& optimizer);

  int period() const { return period_; }
  int pending() const { return pending_; }

 private:
  int period_;
  int pending_ = 0;
  ParamStore buffer_;
};

}  // namespace timediff::nn
