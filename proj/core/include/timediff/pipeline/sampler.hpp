#pragma once

#include <cstdint>
#include <functional>

#include "timediff/data/corpus.hpp"
#include "timediff/nn/param_store.hpp"
#include "timediff/pipeline/checkpoint.hpp"

namespace timediff::pipeline {

struct SampleOptions {
  int count = 1000;
  std::uint64_t seed = 0;
  int chunk = 256;  // samples denoised together
  /// Which parameters to sample with; defaults to the checkpoint's EMA.
  const nn::ParamStore* params = nullptr;
};

/// Ancestral sampling: x_T ~ N(0, I) and uniform c_T, then T reverse steps
/// through the shared denoiser. Final numerical values are clipped to
/// [0, 1], de-scaled with the stored statistics, and blanked where the
/// generated mask says missing.
data::Corpus sample(const Checkpoint& ckpt, const SampleOptions& options);

}  // namespace timediff::pipeline
