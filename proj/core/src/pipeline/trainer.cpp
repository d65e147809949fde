#include "timediff/pipeline/trainer.hpp"

#include <cmath>
#include <span>

#include "timediff/error.hpp"

namespace timediff::pipeline {

Checkpoint initial_state(const TrainConfig& config, const data::Corpus& corpus) {
  config.validate();
  corpus.check();
  if (corpus.empty()) throw InvalidArgument("cannot train on an empty corpus");
  Checkpoint c;
  c.config = config;
  c.stats = data::compute_stats(corpus);
  c.layout = ModelLayout::make(data::EncodedLayout::of(corpus), config);
  c.schedule = cosine_schedule(config.diffusion_steps);
  const Denoiser denoiser(c.layout.shape);
  c.params = denoiser.make_params();
  auto init_rng = nn::RngStream::derive(config.seed, nn::streams::kInit);
  denoiser.initialize(c.params, init_rng);
  c.ema = c.params;
  c.optimizer.first_moment = c.params.zeros_like();
  c.optimizer.second_moment = c.params.zeros_like();
  c.corpus_digest = corpus_digest(data::encode(corpus, c.stats));
  return c;
}

Trainer::Trainer(Checkpoint state, const data::Corpus& corpus)
    : state_(std::move(state)),
      denoiser_(state_.layout.shape),
      adam_(state_.params, {state_.config.learning_rate, state_.config.beta1, state_.config.beta2, 1e-8}),
      ema_(state_.params, state_.config.ema_decay),
      accumulator_(state_.params, state_.config.accumulation) {
  const auto encoded = data::encode(corpus, state_.stats);
  if (corpus_digest(encoded) != state_.corpus_digest) {
    throw InvalidArgument("training corpus does not match the one this state was built from");
  }
  data_ = to_model(encoded, state_.layout);
  adam_.state() = state_.optimizer;
  ema_.shadow() = state_.ema;
  const auto seed = state_.config.seed;
  data_rng_ = nn::RngStream(nn::RngStream::derive(seed, nn::streams::kData).key(), state_.rng_data);
  gaussian_rng_ = nn::RngStream(nn::RngStream::derive(seed, nn::streams::kGaussian).key(), state_.rng_gaussian);
  categorical_rng_ =
      nn::RngStream(nn::RngStream::derive(seed, nn::streams::kCategorical).key(), state_.rng_categorical);
}

StepReport Trainer::train_step() {
  const auto& cfg = state_.config;
  const std::int64_t next = state_.step + 1;
  // Work on copies of the random streams so a failed step leaves no trace.
  auto data_rng = data_rng_;
  auto gaussian_rng = gaussian_rng_;
  auto categorical_rng = categorical_rng_;
  std::vector<nn::ParamStore> grads;
  StepReport report;
  report.step = next;
  for (int micro = 0; micro < cfg.accumulation; ++micro) {
    const auto batch = draw_noised_batch(data_, cfg.batch, state_.schedule, data_rng, gaussian_rng, categorical_rng);
    const Eigen::MatrixXd input = denoiser_.pack(batch.xt, batch.ct);
    DenoiserTrace trace;
    const Eigen::MatrixXd output = denoiser_.forward(state_.params, input, batch.t, &trace);
    const auto loss = diffusion_loss(denoiser_, output, batch, state_.schedule, cfg.lambda);
    double value = loss.total;
    if (fault_) value = fault_(next, value);
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite training loss at step " + std::to_string(next));
    }
    report.loss += value / cfg.accumulation;
    report.numeric += loss.numeric / cfg.accumulation;
    report.discrete += loss.discrete / cfg.accumulation;
    grads.push_back(denoiser_.backward(state_.params, trace, loss.grad_output));
  }
  for (const auto& g : grads) {
    if (!g.all_finite()) throw NumericalError("non-finite gradient at step " + std::to_string(next));
  }
  bool stepped = false;
  for (const auto& g : grads) stepped = accumulator_.accumulate_and_maybe_step(g, state_.params, adam_);
  if (!stepped) throw ContractViolation("gradient accumulation out of phase with optimizer steps");
  ema_.update(state_.params);
  data_rng_ = data_rng;
  gaussian_rng_ = gaussian_rng;
  categorical_rng_ = categorical_rng;
  state_.step = next;
  state_.loss_history.push_back(report.loss);
  synced_ = false;
  return report;
}

void Trainer::run(std::int64_t until, const std::function<void(const StepReport&)>& on_step) {
  while (state_.step < until) {
    const auto r = train_step();
    if (on_step) on_step(r);
  }
}

const Checkpoint& Trainer::state() const {
  if (!synced_) {
    auto& s = state_;
    s.ema = ema_.shadow();
    s.optimizer = adam_.state();
    s.rng_data = data_rng_.counter();
    s.rng_gaussian = gaussian_rng_.counter();
    s.rng_categorical = categorical_rng_.counter();
    synced_ = true;
  }
  return state_;
}

Checkpoint train(Checkpoint state, const data::Corpus& corpus, const std::function<void(const StepReport&)>& log) {
  const TrainConfig cfg = state.config;
  Trainer trainer(std::move(state), corpus);
  const bool save = !cfg.checkpoint.empty();
  trainer.run(cfg.steps, [&](const StepReport& r) {
    if (log && cfg.log_every > 0 && (r.step % cfg.log_every == 0 || r.step == cfg.steps)) log(r);
    if (save && cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0) {
      save_checkpoint(cfg.checkpoint, trainer.state());
    }
  });
  if (save) save_checkpoint(cfg.checkpoint, trainer.state());
  return trainer.state();
}

}  // namespace timediff::pipeline
