#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "timediff/data/corpus.hpp"
#include "timediff/denoiser.hpp"
#include "timediff/nn/rng.hpp"
#include "timediff/pipeline/config.hpp"
#include "timediff/schedule.hpp"

namespace timediff::pipeline {

/// Maps the corpus encoding onto denoiser channels for one discrete mode.
struct ModelLayout {
  DiscreteMode mode = DiscreteMode::multinomial;
  data::EncodedLayout data;
  DenoiserShape shape;

  /// In gaussian_rounding mode the discrete channels become extra Gaussian
  /// rows, and the hidden width is kept equal to the multinomial model's.
  static ModelLayout make(const data::EncodedLayout& data, const TrainConfig& config);

  int discrete_channels() const { return static_cast<int>(data.categories.size()); }
};

/// One training example in denoiser channel space.
struct ModelSample {
  NumericMatrix x0;
  OneHotSequence c0;
};

ModelSample to_model(const data::EncodedSample& sample, const ModelLayout& layout);
std::vector<ModelSample> to_model(const std::vector<data::EncodedSample>& samples, const ModelLayout& layout);

/// Inverse of to_model for generated output. Rounded channels are clipped to
/// [0, 1] and mapped to the nearest category.
data::EncodedSample from_model(const NumericMatrix& x0, const OneHotSequence& c0, const ModelLayout& layout);

/// A micro-batch after forward noising.
struct NoisedBatch {
  std::vector<std::size_t> index;
  std::vector<int> t;
  std::vector<NumericMatrix> eps;
  std::vector<NumericMatrix> xt;
  std::vector<OneHotSequence> c0;
  std::vector<OneHotSequence> ct;

  int size() const { return static_cast<int>(t.size()); }
};

/// Draws `batch` examples with replacement and one step per example from
/// `data_rng`, Gaussian noise from `gaussian_rng`, and c_t from `categorical_rng`.
NoisedBatch draw_noised_batch(const std::vector<ModelSample>& data, int batch, const DiffusionSchedule& schedule,
                              nn::RngStream& data_rng, nn::RngStream& gaussian_rng, nn::RngStream& categorical_rng);

struct LossValue {
  double total = 0.0;
  double numeric = 0.0;   // batch mean of L_N
  double discrete = 0.0;  // batch mean of T * L_C, before lambda
  Eigen::MatrixXd grad_output;
};

/// L = L_N + lambda * T * L_C averaged over the batch, with its gradient with
/// respect to the batched denoiser output.
LossValue diffusion_loss(const Denoiser& denoiser, const Eigen::MatrixXd& output, const NoisedBatch& batch,
                         const DiffusionSchedule& schedule, double lambda);

/// FNV-1a digest of the encoded training data, used to catch resuming
/// against a different corpus.
std::uint64_t corpus_digest(const std::vector<data::EncodedSample>& samples);

}  // namespace timediff::pipeline
