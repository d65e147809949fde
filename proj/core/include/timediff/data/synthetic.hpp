#pragma once

#include <cstdint>
#include <vector>

#include "timediff/data/corpus.hpp"

namespace timediff::data {

/// Sinusoids: every channel of every sample is A sin(2 pi f l + phase) + noise
/// with f ~ U[0.5/L, 4/L], phase ~ U[0, 2 pi), A ~ U[0.4, 1], noise N(0, 0.02^2).
/// Returned samples carry values only (no categorical channels, zero masks).
std::vector<TimeSeriesSample> make_sine_corpus(int n, int numeric_channels, int length, std::uint64_t seed);

/// K-state Markov chains with self-transition probability 0.8 (remaining mass
/// spread evenly), started from the uniform distribution, plus MCAR masks with
/// `mask_rows` rows and the given missing probability.
std::vector<TimeSeriesSample> make_markov_corpus(int n, int categorical_channels, int length, int num_categories,
                                                 std::uint64_t seed, int mask_rows = 0,
                                                 double missing_rate = 0.15);

struct MixedCorpusSpec {
  int n = 2000;
  int numeric_channels = 2;
  int categorical_channels = 1;
  int num_categories = 2;
  int length = 24;
  double missing_rate = 0.15;
  std::uint64_t seed = 7;
};

/// Sine values with Markov categorical channels and MCAR missingness applied
/// to the numerical channels.
Corpus make_mixed_corpus(const MixedCorpusSpec& spec);

inline constexpr double kMarkovStay = 0.8;

}  // namespace timediff::data
