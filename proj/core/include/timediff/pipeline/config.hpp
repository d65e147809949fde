#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace timediff::pipeline {

/// How discrete channels (categorical and missingness) are generated.
enum class DiscreteMode {
  multinomial,
  /// Test-only ablation: each discrete channel becomes one extra Gaussian
  /// channel holding c / (K - 1), rounded back to a category after sampling.
  gaussian_rounding,
};

std::string to_string(DiscreteMode mode);
DiscreteMode parse_discrete_mode(const std::string& text);

struct TrainConfig {
  std::string corpus;
  int diffusion_steps = 1000;
  double lambda = 0.01;
  double learning_rate = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double ema_decay = 0.995;
  int accumulation = 2;
  int batch = 32;
  int layers = 2;
  int hidden_multiple = 4;
  int embed_width = 128;
  std::int64_t steps = 20000;  // optimizer steps
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::int64_t checkpoint_every = 1000;  // 0 = only at the end
  std::int64_t log_every = 100;          // 0 = silent
  DiscreteMode discrete_mode = DiscreteMode::multinomial;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;

  /// Flat key=value form; keys are the field names above.
  std::map<std::string, std::string> to_key_values() const;
  std::string to_text() const;
  /// Missing keys keep their defaults; unknown keys and bad values throw ParseError.
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv);
  static TrainConfig from_file(const std::filesystem::path& path);

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace timediff::pipeline
