#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "timediff/data/corpus.hpp"
#include "timediff/nn/optim.hpp"
#include "timediff/nn/param_store.hpp"
#include "timediff/pipeline/config.hpp"
#include "timediff/pipeline/model.hpp"
#include "timediff/schedule.hpp"

namespace timediff::pipeline {

/// Complete training state. Saved only between optimizer steps, so the
/// gradient accumulation buffer is always empty and not stored.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  TrainConfig config;
  ModelLayout layout;
  data::CorpusStats stats;
  DiffusionSchedule schedule;
  nn::ParamStore params;
  nn::ParamStore ema;
  nn::OptimizerState optimizer;
  std::uint64_t rng_data = 0;  // stream counters; keys derive from config.seed
  std::uint64_t rng_gaussian = 0;
  std::uint64_t rng_categorical = 0;
  std::int64_t step = 0;
  std::vector<double> loss_history;  // one entry per optimizer step
  std::uint64_t corpus_digest = 0;
};

/// Binary container: 8-byte magic, u32 format version, u32 entry count, then
/// entries of (name, kind, payload). Tensors are little-endian f64.
void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

/// Writes to a temporary sibling and renames it into place, so an existing
/// checkpoint survives a failed write.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws ParseError on a truncated, corrupt, or wrong-version file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace timediff::pipeline
