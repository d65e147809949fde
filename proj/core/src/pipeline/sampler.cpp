#include "timediff/pipeline/sampler.hpp"

#include <algorithm>
#include <vector>

#include "timediff/denoiser.hpp"
#include "timediff/error.hpp"
#include "timediff/gaussian.hpp"
#include "timediff/multinomial.hpp"
#include "timediff/pipeline/model.hpp"

namespace timediff::pipeline {

data::Corpus sample(const Checkpoint& ckpt, const SampleOptions& options) {
  if (options.count < 0 || options.chunk < 1) throw InvalidArgument("sample: bad count or chunk size");
  const Denoiser denoiser(ckpt.layout.shape);
  const nn::ParamStore& params = options.params != nullptr ? *options.params : ckpt.ema;
  nn::require_same_layout(params, denoiser.make_params(), "sample");
  const auto& shape = ckpt.layout.shape;
  const auto& schedule = ckpt.schedule;
  const int length = ckpt.layout.data.length;
  const auto p_r = shape.numeric_channels;

  // Every sample owns its random streams, so the output does not depend on
  // how samples are grouped into chunks.
  const auto gaussian_key = nn::RngStream::derive(options.seed, nn::streams::kGaussian).key();
  const auto categorical_key = nn::RngStream::derive(options.seed, nn::streams::kCategorical).key();
  std::vector<nn::RngStream> gaussian_rng, categorical_rng;
  auto normal_matrix = [&](Eigen::Index rows, int batch) {
    Eigen::MatrixXd z(rows, static_cast<Eigen::Index>(length) * batch);
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = gaussian_rng[static_cast<std::size_t>(j % batch)].normal();
    return z;
  };
  auto draw = [&](const OneHotSequence& probs, int batch) {
    OneHotSequence out;
    out.hard = true;
    for (const auto& ch : probs.channels) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ch.rows(), ch.cols());
      for (Eigen::Index l = 0; l < ch.cols(); ++l) {
        const double u = categorical_rng[static_cast<std::size_t>(l % batch)].uniform() * ch.col(l).sum();
        double acc = 0.0;
        Eigen::Index k = 0;
        for (; k < ch.rows() - 1; ++k) {
          acc += ch(k, l);
          if (u < acc) break;
        }
        h(k, l) = 1.0;
      }
      out.channels.push_back(std::move(h));
    }
    return out;
  };

  std::vector<data::EncodedSample> generated;
  generated.reserve(static_cast<std::size_t>(options.count));
  for (int first = 0; first < options.count; first += options.chunk) {
    const int batch = std::min(options.chunk, options.count - first);
    const Eigen::Index cols = static_cast<Eigen::Index>(length) * batch;
    gaussian_rng.clear();
    categorical_rng.clear();
    for (int b = 0; b < batch; ++b) {
      const auto id = static_cast<std::uint64_t>(first + b);
      gaussian_rng.emplace_back(nn::mix64(gaussian_key + id));
      categorical_rng.emplace_back(nn::mix64(categorical_key + id));
    }
    // Both branches stay in the batched time-major layout; every reverse
    // operation acts column-wise, so no per-sample unpacking is needed.
    Eigen::MatrixXd x = normal_matrix(p_r, batch);
    OneHotSequence c;
    for (int k : shape.categories) {
      c.channels.emplace_back(Eigen::MatrixXd::Constant(k, cols, 1.0 / k));
    }
    if (!c.channels.empty()) c = draw(c, batch);

    Eigen::MatrixXd input(shape.input_width(), cols);
    std::vector<int> steps(static_cast<std::size_t>(batch));
    for (int t = schedule.total_steps; t >= 1; --t) {
      input.topRows(p_r) = x;
      Eigen::Index row = p_r;
      for (const auto& ch : c.channels) {
        input.middleRows(row, ch.rows()) = ch;
        row += ch.rows();
      }
      std::fill(steps.begin(), steps.end(), t);
      const Eigen::MatrixXd out = denoiser.forward(params, input, steps);
      if (!out.allFinite()) throw NumericalError("non-finite denoiser output at reverse step " + std::to_string(t));
      const Eigen::MatrixXd z = t > 1 ? normal_matrix(p_r, batch) : Eigen::MatrixXd::Zero(p_r, cols);
      x = p_sample_step(x, out.topRows(p_r), t, z, schedule);
      if (!c.channels.empty()) {
        CategoryLogits logits;
        row = p_r;
        for (const auto& ch : c.channels) {
          logits.emplace_back(out.middleRows(row, ch.rows()));
          row += ch.rows();
        }
        if (t > 1) {
          OneHotSequence probs;
          probs.channels = q_posterior(c, softmax(logits), t, schedule).normalized;
          c = draw(probs, batch);
        } else {
          nn::RngStream unused;  // the final step is an argmax
          c = p_sample_step_discrete(c, logits, t, schedule, unused);
        }
      }
    }

    for (int b = 0; b < batch; ++b) {
      NumericMatrix xb(p_r, length);
      OneHotSequence cb;
      cb.hard = c.hard;
      for (const auto& ch : c.channels) cb.channels.emplace_back(ch.rows(), length);
      for (int l = 0; l < length; ++l) {
        const Eigen::Index col = static_cast<Eigen::Index>(l) * batch + b;
        xb.col(l) = x.col(col);
        for (std::size_t p = 0; p < cb.channels.size(); ++p) cb.channels[p].col(l) = c.channels[p].col(col);
      }
      generated.push_back(from_model(xb, cb, ckpt.layout));
    }
  }
  return data::decode(generated, ckpt.layout.data, ckpt.stats);
}

}  // namespace timediff::pipeline
