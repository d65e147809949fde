#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timediff/data/corpus.hpp"
#include "timediff/eval/metrics.hpp"
#include "timediff/eval/nnaa.hpp"

namespace timediff::pipeline {

struct EvalOptions {
  int reruns = 10;
  std::uint64_t seed = 0;
  eval::MetricTrainerConfig trainer;
  int nnaa_max_points = 2000;  // per set, after seeded subsampling
  bool discriminative = true;
  bool predictive = true;
  bool nnaa = true;
};

struct EvalReport {
  eval::MetricSummary discriminative;
  eval::MetricSummary predictive;           // train on synth, test on real test
  eval::MetricSummary predictive_baseline;  // train on real train, test on real test
  eval::NNAAReport nnaa;
  int nnaa_points = 0;
  std::vector<std::string> warnings;
};

/// Runs the metric suite. Discriminative reruns separate real_train from
/// synth. Throws InvalidArgument if the three corpora differ in layout.
EvalReport evaluate(const data::Corpus& real_train, const data::Corpus& real_test, const data::Corpus& synth,
                    const EvalOptions& options);

/// Deterministic JSON rendering (fixed key order, shortest round-trip numbers).
std::string to_json(const EvalReport& report, const EvalOptions& options);

}  // namespace timediff::pipeline
