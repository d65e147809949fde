#include "timediff/pipeline/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "timediff/error.hpp"
#include "timediff/gaussian.hpp"
#include "timediff/multinomial.hpp"

namespace timediff::pipeline {

ModelLayout ModelLayout::make(const data::EncodedLayout& data, const TrainConfig& config) {
  ModelLayout m;
  m.mode = config.discrete_mode;
  m.data = data;
  const auto full = DenoiserShape::with_defaults(data.numeric_channels, data.categories, config.embed_width,
                                                 config.hidden_multiple, config.layers);
  if (m.mode == DiscreteMode::multinomial) {
    m.shape = full;
  } else {
    m.shape = DenoiserShape::with_defaults(data.numeric_channels + static_cast<int>(data.categories.size()), {},
                                           config.embed_width, config.hidden_multiple, config.layers);
    m.shape.hidden = full.hidden;
  }
  m.shape.validate();
  return m;
}

ModelSample to_model(const data::EncodedSample& sample, const ModelLayout& layout) {
  ModelSample m;
  if (layout.mode == DiscreteMode::multinomial) {
    m.x0 = sample.x0;
    m.c0 = one_hot_encode(sample.c0, layout.data.categories);
    return m;
  }
  const auto p_r = layout.data.numeric_channels;
  const auto n_d = layout.discrete_channels();
  m.x0.resize(p_r + n_d, layout.data.length);
  if (p_r > 0) m.x0.topRows(p_r) = sample.x0;
  for (int p = 0; p < n_d; ++p) {
    const double denom = layout.data.categories[static_cast<std::size_t>(p)] - 1;
    m.x0.row(p_r + p) = sample.c0.row(p).cast<double>() / denom;
  }
  m.c0.hard = true;
  return m;
}

std::vector<ModelSample> to_model(const std::vector<data::EncodedSample>& samples, const ModelLayout& layout) {
  std::vector<ModelSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_model(s, layout));
  return out;
}

data::EncodedSample from_model(const NumericMatrix& x0, const OneHotSequence& c0, const ModelLayout& layout) {
  data::EncodedSample e;
  const auto p_r = layout.data.numeric_channels;
  if (layout.mode == DiscreteMode::multinomial) {
    e.x0 = x0;
    e.c0 = one_hot_decode(c0);
    if (e.c0.rows() == 0) e.c0.resize(0, layout.data.length);
    return e;
  }
  const auto n_d = layout.discrete_channels();
  e.x0 = x0.topRows(p_r);
  e.c0.resize(n_d, x0.cols());
  for (int p = 0; p < n_d; ++p) {
    const int k = layout.data.categories[static_cast<std::size_t>(p)];
    for (Eigen::Index l = 0; l < x0.cols(); ++l) {
      const double v = std::clamp(x0(p_r + p, l), 0.0, 1.0);
      e.c0(p, l) = std::clamp(static_cast<int>(std::lround(v * (k - 1))), 0, k - 1);
    }
  }
  return e;
}

NoisedBatch draw_noised_batch(const std::vector<ModelSample>& data, int batch, const DiffusionSchedule& schedule,
                              nn::RngStream& data_rng, nn::RngStream& gaussian_rng, nn::RngStream& categorical_rng) {
  if (data.empty()) throw InvalidArgument("cannot draw a batch from an empty corpus");
  NoisedBatch b;
  const auto n = static_cast<std::size_t>(batch);
  b.index.resize(n);
  b.t.resize(n);
  b.eps.resize(n);
  b.xt.resize(n);
  b.c0.resize(n);
  b.ct.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.index[i] = data_rng.uniform_index(data.size());
    b.t[i] = 1 + static_cast<int>(data_rng.uniform_index(static_cast<std::uint64_t>(schedule.total_steps)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data[b.index[i]];
    NumericMatrix eps(s.x0.rows(), s.x0.cols());
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = gaussian_rng.normal();
    b.xt[i] = q_sample(s.x0, b.t[i], eps, schedule);
    b.eps[i] = std::move(eps);
    b.c0[i] = s.c0;
    b.ct[i] = s.c0.num_channels() == 0 ? s.c0
                                        : sample_categorical(q_marginal_probs(s.c0, b.t[i], schedule), categorical_rng);
  }
  return b;
}

LossValue diffusion_loss(const Denoiser& denoiser, const Eigen::MatrixXd& output, const NoisedBatch& batch,
                         const DiffusionSchedule& schedule, double lambda) {
  LossValue v;
  v.grad_output = Eigen::MatrixXd::Zero(output.rows(), output.cols());
  const int n = batch.size();
  const double inv_n = 1.0 / n;
  const double weight_t = static_cast<double>(schedule.total_steps);
  const bool has_numeric = denoiser.shape().numeric_channels > 0;
  for (int b = 0; b < n; ++b) {
    const auto i = static_cast<std::size_t>(b);
    const auto out = denoiser.unpack(output, n, b);
    NumericMatrix d_eps = NumericMatrix::Zero(out.eps_pred.rows(), out.eps_pred.cols());
    if (has_numeric) {
      v.numeric += loss_numerical(batch.eps[i], out.eps_pred) * inv_n;
      d_eps = loss_numerical_grad(batch.eps[i], out.eps_pred) * inv_n;
    }
    CategoryLogits d_logits(out.logits.size());
    if (!out.logits.empty()) {
      auto dl = loss_discrete_with_grad(batch.c0[i], batch.ct[i], out.logits, batch.t[i], schedule);
      v.discrete += weight_t * dl.value * inv_n;
      for (std::size_t p = 0; p < d_logits.size(); ++p) d_logits[p] = dl.grad_logits[p] * (lambda * weight_t * inv_n);
    }
    denoiser.scatter(v.grad_output, n, b, d_eps, d_logits);
  }
  v.total = v.numeric + lambda * v.discrete;
  return v;
}

std::uint64_t corpus_digest(const std::vector<data::EncodedSample>& samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int k = 0; k < 8; ++k) {
      h ^= (x >> (8 * k)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(samples.size());
  for (const auto& s : samples) {
    mix(static_cast<std::uint64_t>(s.x0.size()));
    for (Eigen::Index k = 0; k < s.x0.size(); ++k) mix(std::bit_cast<std::uint64_t>(s.x0.data()[k]));
    for (Eigen::Index k = 0; k < s.c0.size(); ++k) mix(static_cast<std::uint64_t>(s.c0.data()[k]));
  }
  return h;
}

}  // namespace timediff::pipeline
