#pragma once

#include <vector>

#include <Eigen/Dense>

#include "timediff/data/corpus.hpp"

namespace timediff::eval {

/// Turns corpora into metric-model inputs. Each time step becomes a vector of
/// the scaled (mean-imputed) numerical values, the mask bits, and the one-hot
/// categories. Scaling and standardisation statistics come from the real
/// training corpus passed to the constructor and are applied to every corpus.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(const data::Corpus& real_train);

  int feature_width() const { return width_; }
  int length() const { return length_; }
  const data::Corpus& reference() const { return layout_; }
  const data::CorpusStats& stats() const { return stats_; }

  /// Unstandardised per-step features, one F x L matrix per sample.
  std::vector<Eigen::MatrixXd> raw_sequences(const data::Corpus& corpus) const;
  /// Per-feature standardised sequences (statistics pooled over samples and steps).
  std::vector<Eigen::MatrixXd> sequences(const data::Corpus& corpus) const;
  /// Flattened sequences standardised per coordinate, one column per sample.
  Eigen::MatrixXd flattened(const data::Corpus& corpus) const;

 private:
  void require_layout(const data::Corpus& corpus) const;

  data::Corpus layout_;  // samples left empty
  data::CorpusStats stats_;
  int width_ = 0;
  int length_ = 0;
  Eigen::VectorXd step_mean_, step_inv_sd_;
  Eigen::VectorXd flat_mean_, flat_inv_sd_;
};

/// Packs sequences into a time-major batch (column l * B + b), optionally
/// restricted to steps [first, first + count).
Eigen::MatrixXd pack_time_major(const std::vector<const Eigen::MatrixXd*>& seqs, int first, int count);

}  // namespace timediff::eval
