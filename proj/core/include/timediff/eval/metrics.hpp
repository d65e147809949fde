#pragma once

#include <cstdint>
#include <vector>

#include "timediff/data/corpus.hpp"
#include "timediff/eval/features.hpp"

namespace timediff::eval {

/// Plain Adam, no EMA or accumulation. Defaults follow the usual
/// time-series GAN benchmark harness (2000 steps, batch 128, lr 1e-3).
struct MetricTrainerConfig {
  int steps = 2000;
  int batch = 128;
  double learning_rate = 1e-3;
  int hidden_multiple = 4;
  double train_fraction = 0.8;
};

/// |0.5 - held-out accuracy| of a 1-layer GRU classifier separating `real`
/// from `synth`. Each corpus is split train/test by `train_fraction`.
/// Throws InvalidArgument with fewer than 20 samples on either side.
double discriminative_score(const FeatureEncoder& encoder, const data::Corpus& real, const data::Corpus& synth,
                            const MetricTrainerConfig& config, std::uint64_t seed);

/// Trains a 1-layer GRU with a linear head on `train` to predict the next
/// step's numerical values from the current step's features, then returns
/// the mean absolute error on `test` over observed target entries.
double predictive_score(const FeatureEncoder& encoder, const data::Corpus& train, const data::Corpus& test,
                        const MetricTrainerConfig& config, std::uint64_t seed);

/// Mean of |prediction - target| over entries where mask == 0.
double masked_mae(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target, const Eigen::MatrixXi& mask);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

MetricSummary summarize(std::vector<double> values, std::vector<std::uint64_t> seeds);

/// Seeds for `count` reruns derived from a master seed.
std::vector<std::uint64_t> rerun_seeds(std::uint64_t master_seed, int count);

}  // namespace timediff::eval
