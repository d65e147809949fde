#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace timediff::pipeline {

struct GradcheckOptions {
  int numeric_channels = 1;
  std::vector<int> categories = {2};
  int length = 3;
  int hidden = 8;
  int embed_width = 8;
  int layers = 2;
  int batch = 2;
  int diffusion_steps = 10;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_params = 20000;
  /// Test hook: perturbs the analytic gradient of this group.
  std::string corrupt_group;
};

struct GradcheckRow {
  std::string group;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradcheckResult {
  std::size_t param_count = 0;
  std::vector<GradcheckRow> rows;
  bool pass = false;
};

/// Compares Denoiser::backward against central differences of the full
/// training loss at a random point, per parameter group. Relative error is
/// |a - n| / max(|a|, |n|, 1e-6). Throws InvalidArgument when the model has
/// `max_params` parameters or more.
GradcheckResult gradcheck(const GradcheckOptions& options);

}  // namespace timediff::pipeline
