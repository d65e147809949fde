#include "timediff/pipeline/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "timediff/error.hpp"
#include "timediff/eval/features.hpp"
#include "timediff/nn/rng.hpp"

namespace timediff::pipeline {

namespace {

data::Corpus subsample(const data::Corpus& c, std::size_t n, std::uint64_t seed) {
  if (c.size() <= n) return c;
  return data::split(c, static_cast<double>(n) / static_cast<double>(c.size()), seed).first;
}

nlohmann::ordered_json summary_json(const eval::MetricSummary& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["sd"] = s.sd;
  j["reruns"] = s.values.size();
  j["values"] = s.values;
  j["seeds"] = s.seeds;
  return j;
}

}  // namespace

EvalReport evaluate(const data::Corpus& real_train, const data::Corpus& real_test, const data::Corpus& synth,
                    const EvalOptions& options) {
  if (!real_train.same_layout(real_test) || !real_train.same_layout(synth)) {
    throw InvalidArgument("evaluate: real train, real test and synthetic corpora have different layouts");
  }
  if (options.reruns < 1) throw InvalidArgument("evaluate: need at least one rerun");
  const eval::FeatureEncoder encoder(real_train);
  EvalReport r;
  const auto seeds = eval::rerun_seeds(options.seed, options.reruns);

  if (options.discriminative) {
    std::vector<double> v;
    for (auto s : seeds) v.push_back(eval::discriminative_score(encoder, real_train, synth, options.trainer, s));
    r.discriminative = eval::summarize(std::move(v), seeds);
  }
  if (options.predictive) {
    std::vector<double> v, base;
    for (auto s : seeds) {
      v.push_back(eval::predictive_score(encoder, synth, real_test, options.trainer, s));
      base.push_back(eval::predictive_score(encoder, real_train, real_test, options.trainer, s));
    }
    r.predictive = eval::summarize(std::move(v), seeds);
    r.predictive_baseline = eval::summarize(std::move(base), seeds);
  }
  if (options.nnaa) {
    const auto n = std::min({real_train.size(), real_test.size(), synth.size(),
                             static_cast<std::size_t>(std::max(options.nnaa_max_points, 2))});
    const auto pick_seed = nn::mix64(options.seed ^ 0x4e4e4141ULL);
    const auto tr = encoder.flattened(subsample(real_train, n, pick_seed));
    const auto te = encoder.flattened(subsample(real_test, n, pick_seed + 1));
    const auto sy = encoder.flattened(subsample(synth, n, pick_seed + 2));
    r.nnaa = eval::nnaa(tr, te, sy);
    r.nnaa_points = static_cast<int>(n);
    if (r.nnaa.aa_train == 0.0) {
      r.warnings.push_back("overfit: aa_train = 0, every synthetic sample coincides with a training sample");
    }
  }
  return r;
}

std::string to_json(const EvalReport& r, const EvalOptions& options) {
  nlohmann::ordered_json j;
  j["seed"] = options.seed;
  j["reruns"] = options.reruns;
  j["metric_trainer"] = {{"steps", options.trainer.steps},
                         {"batch", options.trainer.batch},
                         {"learning_rate", options.trainer.learning_rate},
                         {"hidden_multiple", options.trainer.hidden_multiple},
                         {"train_fraction", options.trainer.train_fraction}};
  if (options.discriminative) j["discriminative"] = summary_json(r.discriminative);
  if (options.predictive) {
    j["predictive"] = summary_json(r.predictive);
    j["predictive_baseline"] = summary_json(r.predictive_baseline);
  }
  if (options.nnaa) {
    j["nnaa"] = {{"points", r.nnaa_points},
                 {"aa_test", r.nnaa.aa_test},
                 {"aa_train", r.nnaa.aa_train},
                 {"nnaa", r.nnaa.nnaa}};
  }
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

}  // namespace timediff::pipeline
