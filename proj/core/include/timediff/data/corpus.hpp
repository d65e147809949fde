#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "timediff/gaussian.hpp"
#include "timediff/multinomial.hpp"

namespace timediff::data {

/// One subject. `values` uses NaN for missing entries; `mask` is 1 exactly
/// where the value is missing.
struct TimeSeriesSample {
  std::int64_t id = 0;
  Eigen::MatrixXd values;     // P_r x L
  CategoryMatrix categories;  // P_d x L
  Eigen::MatrixXi mask;       // P_r x L
};

struct Corpus {
  int numeric_channels = 0;
  int length = 0;
  std::vector<int> categories;  // K per categorical channel
  std::vector<TimeSeriesSample> samples;

  int categorical_channels() const { return static_cast<int>(categories.size()); }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Throws InvalidArgument if any sample disagrees with the declared layout.
  void check() const;
  bool same_layout(const Corpus& other) const;
};

/// Per numerical channel statistics over observed entries of a training split.
struct CorpusStats {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> mean;

  int channels() const { return static_cast<int>(mean.size()); }
};

/// Channels that are missing everywhere get min = max = mean = 0.
CorpusStats compute_stats(const Corpus& train);

struct DerivedMask {
  Eigen::MatrixXi mask;       // 1 = missing
  Eigen::MatrixXd observed;   // raw values, NaN where missing
  std::vector<int> fully_missing_channels;
};

/// mask(p, l) = 0 if raw(p, l) is present, 1 if it is NaN.
DerivedMask derive_mask(const Eigen::MatrixXd& raw);

/// Replaces missing entries by the channel mean, then min-max scales each
/// channel with the training statistics. Constant channels map to 0.5.
NumericMatrix impute_and_scale(const Eigen::MatrixXd& raw, const Eigen::MatrixXi& mask, const CorpusStats& stats);

/// Inverse of the min-max scaling (constant channels map back to their value).
Eigen::MatrixXd descale(const NumericMatrix& scaled, const CorpusStats& stats);

/// Diffusion-ready view of a corpus: scaled values and the discrete channels
/// (categorical channels first, then one K = 2 mask channel per numerical
/// channel).
struct EncodedSample {
  NumericMatrix x0;
  CategoryMatrix c0;
};

struct EncodedLayout {
  int numeric_channels = 0;
  int length = 0;
  int categorical_channels = 0;
  std::vector<int> categories;  // categorical Ks followed by 2 per mask channel

  static EncodedLayout of(const Corpus& corpus);
};

std::vector<EncodedSample> encode(const Corpus& corpus, const CorpusStats& stats);

/// Maps encoded samples back to corpus form. Numerical values are clipped to
/// [0, 1] before de-scaling, and entries whose generated mask is 1 become NaN.
Corpus decode(const std::vector<EncodedSample>& encoded, const EncodedLayout& layout, const CorpusStats& stats);

/// Deterministic seeded split: the first `fraction` of a shuffled index list
/// goes to the first corpus.
std::pair<Corpus, Corpus> split(const Corpus& corpus, double fraction, std::uint64_t seed);

}  // namespace timediff::data
