#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "timediff/data/corpus.hpp"
#include "timediff/denoiser.hpp"
#include "timediff/nn/optim.hpp"
#include "timediff/pipeline/checkpoint.hpp"
#include "timediff/pipeline/config.hpp"
#include "timediff/pipeline/model.hpp"

namespace timediff::pipeline {

/// Fresh training state: statistics from `corpus`, cosine schedule, and
/// initialised parameters (EMA starts equal to them).
Checkpoint initial_state(const TrainConfig& config, const data::Corpus& corpus);

struct StepReport {
  std::int64_t step = 0;  // optimizer steps completed
  double loss = 0.0;      // mean over the step's micro-batches
  double numeric = 0.0;
  double discrete = 0.0;
};

class Trainer {
 public:
  /// `corpus` must be the corpus the state was built from (checked by digest).
  Trainer(Checkpoint state, const data::Corpus& corpus);

  std::int64_t step() const { return state_.step; }
  const Denoiser& denoiser() const { return denoiser_; }

  /// Runs one optimizer step: `accumulation` micro-batches, Adam, EMA.
  /// Throws NumericalError (naming the step) on a non-finite loss; the
  /// state is unchanged in that case.
  StepReport train_step();

  /// Trains until `step() == until`, calling `on_step` after every step.
  void run(std::int64_t until, const std::function<void(const StepReport&)>& on_step = {});

  /// Snapshot of the full state, valid between steps.
  const Checkpoint& state() const;

  /// Test hook: rewrites each micro-batch loss before the finiteness check.
  void set_loss_fault(std::function<double(std::int64_t step, double loss)> fault) { fault_ = std::move(fault); }

 private:
  mutable Checkpoint state_;
  Denoiser denoiser_;
  std::vector<ModelSample> data_;
  nn::Adam adam_;
  nn::Ema ema_;
  nn::GradAccumulator accumulator_;
  nn::RngStream data_rng_, gaussian_rng_, categorical_rng_;
  std::function<double(std::int64_t, double)> fault_;
  mutable bool synced_ = true;
};

/// Trains `state` to `config.steps`, checkpointing every
/// `config.checkpoint_every` steps and at the end when `config.checkpoint`
/// is set. `log` receives periodic progress lines. Returns the final state.
Checkpoint train(Checkpoint state, const data::Corpus& corpus, const std::function<void(const StepReport&)>& log = {});

}  // namespace timediff::pipeline
