#include "timediff/data/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "timediff/error.hpp"
#include "timediff/nn/rng.hpp"

namespace timediff::data {

std::vector<TimeSeriesSample> make_sine_corpus(int n, int numeric_channels, int length, std::uint64_t seed) {
  if (n < 0 || numeric_channels < 0 || length < 1) throw InvalidArgument("make_sine_corpus: bad shape");
  auto rng = nn::RngStream::derive(seed, "sine");
  std::vector<TimeSeriesSample> out;
  out.reserve(static_cast<std::size_t>(n));
  const double L = length;
  for (int i = 0; i < n; ++i) {
    TimeSeriesSample s;
    s.id = i;
    s.values.resize(numeric_channels, length);
    s.mask = Eigen::MatrixXi::Zero(numeric_channels, length);
    s.categories.resize(0, length);
    for (int p = 0; p < numeric_channels; ++p) {
      const double freq = rng.uniform(0.5 / L, 4.0 / L);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double amp = rng.uniform(0.4, 1.0);
      for (int l = 0; l < length; ++l) {
        s.values(p, l) = amp * std::sin(2.0 * std::numbers::pi * freq * l + phase) + 0.02 * rng.normal();
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TimeSeriesSample> make_markov_corpus(int n, int categorical_channels, int length, int num_categories,
                                                 std::uint64_t seed, int mask_rows, double missing_rate) {
  if (num_categories < 2) throw InvalidArgument("make_markov_corpus: K must be >= 2");
  if (n < 0 || categorical_channels < 0 || length < 1 || mask_rows < 0)
    throw InvalidArgument("make_markov_corpus: bad shape");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0))
    throw InvalidArgument("make_markov_corpus: missing rate must lie in [0, 1]");
  auto chain_rng = nn::RngStream::derive(seed, "markov");
  auto mask_rng = nn::RngStream::derive(seed, "mcar");
  const auto k = static_cast<std::uint64_t>(num_categories);
  std::vector<TimeSeriesSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    TimeSeriesSample s;
    s.id = i;
    s.categories.resize(categorical_channels, length);
    for (int p = 0; p < categorical_channels; ++p) {
      int state = static_cast<int>(chain_rng.uniform_index(k));
      s.categories(p, 0) = state;
      for (int l = 1; l < length; ++l) {
        if (chain_rng.uniform() >= kMarkovStay) {
          // Move to one of the other K - 1 states uniformly.
          const int jump = 1 + static_cast<int>(chain_rng.uniform_index(k - 1));
          state = (state + jump) % num_categories;
        }
        s.categories(p, l) = state;
      }
    }
    s.mask.resize(mask_rows, length);
    for (int p = 0; p < mask_rows; ++p) {
      for (int l = 0; l < length; ++l) s.mask(p, l) = mask_rng.uniform() < missing_rate ? 1 : 0;
    }
    s.values = Eigen::MatrixXd::Zero(mask_rows, length);
    out.push_back(std::move(s));
  }
  return out;
}

Corpus make_mixed_corpus(const MixedCorpusSpec& spec) {
  auto sines = make_sine_corpus(spec.n, spec.numeric_channels, spec.length, spec.seed);
  auto chains = make_markov_corpus(spec.n, spec.categorical_channels, spec.length, spec.num_categories, spec.seed,
                                   spec.numeric_channels, spec.missing_rate);
  Corpus c;
  c.numeric_channels = spec.numeric_channels;
  c.length = spec.length;
  c.categories.assign(static_cast<std::size_t>(spec.categorical_channels), spec.num_categories);
  c.samples.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    auto& s = sines[static_cast<std::size_t>(i)];
    auto& m = chains[static_cast<std::size_t>(i)];
    s.categories = std::move(m.categories);
    s.mask = std::move(m.mask);
    for (Eigen::Index p = 0; p < s.values.rows(); ++p) {
      for (Eigen::Index l = 0; l < s.values.cols(); ++l) {
        if (s.mask(p, l) != 0) s.values(p, l) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    c.samples.push_back(std::move(s));
  }
  return c;
}

}  // namespace timediff::data
