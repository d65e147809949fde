#pragma once

#include <cstdint>
#include <string_view>

namespace timediff::nn {

/// Counter-based random stream. The whole state is a single 64-bit counter,
/// so a stream can be checkpointed and restored exactly. Streams derived from
/// the same master seed with different names never share a sequence.
///
/// Distributions are implemented here rather than taken from <random> because
/// the standard distributions are implementation defined, and the training
/// pipeline promises bit-identical results given a seed.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  /// Stream keyed by (seed, name).
  static RngStream derive(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_low();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Named streams used across training and sampling.
namespace streams {
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kData = "data";
inline constexpr std::string_view kGaussian = "gaussian";
inline constexpr std::string_view kCategorical = "categorical";
}  // namespace streams

std::uint64_t mix64(std::uint64_t x);

}  // namespace timediff::nn
