// timediff command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "timediff/data/csv.hpp"
#include "timediff/data/synthetic.hpp"
#include "timediff/error.hpp"
#include "timediff/pipeline/checkpoint.hpp"
#include "timediff/pipeline/config.hpp"
#include "timediff/pipeline/evaluate.hpp"
#include "timediff/pipeline/gradcheck.hpp"
#include "timediff/pipeline/sampler.hpp"
#include "timediff/pipeline/trainer.hpp"
#include "timediff/runtime.hpp"
#include "timediff/schedule.hpp"

namespace td = timediff;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path stats_path_for(const fs::path& corpus) {
  auto p = corpus;
  p += ".stats";
  return p;
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string kind = "sine+markov";
  td::data::MixedCorpusSpec spec;
  std::string out;
  std::string test_out;
  double test_fraction = 0.2;
};

int run_gen_data(const GenDataArgs& a) {
  auto spec = a.spec;
  if (a.kind == "sine") {
    spec.categorical_channels = 0;
  } else if (a.kind == "markov") {
    spec.numeric_channels = 0;
  } else if (a.kind != "sine+markov") {
    throw UsageError("--kind must be sine, markov or sine+markov");
  }
  if (spec.n < 0 || spec.length < 1 || spec.numeric_channels < 0 || spec.categorical_channels < 0 ||
      spec.num_categories < 2 || !(spec.missing_rate >= 0.0 && spec.missing_rate <= 1.0)) {
    throw UsageError("invalid corpus shape arguments");
  }
  auto corpus = td::data::make_mixed_corpus(spec);
  td::data::Corpus test;
  if (!a.test_out.empty()) {
    auto parts = td::data::split(corpus, 1.0 - a.test_fraction, spec.seed);
    corpus = std::move(parts.first);
    test = std::move(parts.second);
  }
  td::data::write_corpus(a.out, corpus);
  td::data::write_stats(stats_path_for(a.out), {td::data::compute_stats(corpus), corpus.categories});
  if (!a.test_out.empty()) td::data::write_corpus(a.test_out, test);
  std::cout << "wrote " << corpus.size() << " samples to " << a.out << '\n';
  if (!a.test_out.empty()) std::cout << "wrote " << test.size() << " samples to " << a.test_out << '\n';
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string resume;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<double> lambda;
  std::optional<int> diffusion_steps;
  std::optional<int> batch;
  std::optional<std::string> discrete_mode;
};

int run_train(const TrainArgs& a) {
  td::pipeline::Checkpoint state;
  std::optional<td::data::Corpus> corpus;
  if (!a.resume.empty()) {
    if (a.lambda || a.diffusion_steps || a.batch || a.seed || !a.config.empty() || a.discrete_mode) {
      throw UsageError("--resume continues a run as configured; only --steps, --out and --corpus may be given");
    }
    state = td::pipeline::load_checkpoint(a.resume);
    if (a.steps) state.config.steps = *a.steps;
    if (!a.out.empty()) state.config.checkpoint = a.out;
    if (!a.corpus.empty()) state.config.corpus = a.corpus;
    try {
      state.config.validate();
    } catch (const td::InvalidArgument& e) {
      throw UsageError(e.what());
    }
    corpus = td::data::read_corpus(state.config.corpus, state.layout.data.categories);
  } else {
    td::pipeline::TrainConfig cfg;
    if (!a.config.empty()) cfg = td::pipeline::TrainConfig::from_file(a.config);
    if (!a.corpus.empty()) cfg.corpus = a.corpus;
    if (!a.out.empty()) cfg.checkpoint = a.out;
    if (a.seed) cfg.seed = *a.seed;
    if (a.steps) cfg.steps = *a.steps;
    if (a.lambda) cfg.lambda = *a.lambda;
    if (a.diffusion_steps) cfg.diffusion_steps = *a.diffusion_steps;
    if (a.batch) cfg.batch = *a.batch;
    if (a.discrete_mode) cfg.discrete_mode = td::pipeline::parse_discrete_mode(*a.discrete_mode);
    if (cfg.corpus.empty()) throw UsageError("no corpus given (--corpus or 'corpus' config key)");
    if (cfg.checkpoint.empty()) throw UsageError("no checkpoint path given (--out or 'checkpoint' config key)");
    try {
      cfg.validate();
    } catch (const td::InvalidArgument& e) {
      throw UsageError(e.what());
    }
    corpus = td::data::read_corpus(cfg.corpus);
    state = td::pipeline::initial_state(cfg, *corpus);
  }
  if (state.config.checkpoint.empty()) throw UsageError("no checkpoint path given (--out)");
  const auto final_state = td::pipeline::train(std::move(state), *corpus, [](const td::pipeline::StepReport& r) {
    std::fprintf(stderr, "step %lld loss %.6f (numeric %.6f, discrete %.6f)\n", static_cast<long long>(r.step),
                 r.loss, r.numeric, r.discrete);
  });
  std::cout << "trained to step " << final_state.step << ", checkpoint " << final_state.config.checkpoint << '\n';
  return kOk;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint;
  std::string out;
  int n = 1000;
  std::uint64_t seed = 0;
  int chunk = 256;
};

int run_sample(const SampleArgs& a) {
  const auto ckpt = td::pipeline::load_checkpoint(a.checkpoint);
  td::pipeline::SampleOptions opt;
  opt.count = a.n;
  opt.seed = a.seed;
  opt.chunk = a.chunk;
  const auto synth = td::pipeline::sample(ckpt, opt);
  td::data::write_corpus(a.out, synth);
  std::cout << "wrote " << synth.size() << " samples to " << a.out << '\n';
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string real_train, real_test, synth, out;
  td::pipeline::EvalOptions options;
};

int run_eval(const EvalArgs& a) {
  const auto train = td::data::read_corpus(a.real_train);
  // Category counts of the real training corpus bound the others' layouts.
  const auto test = td::data::read_corpus(a.real_test, train.categories);
  const auto synth = td::data::read_corpus(a.synth, train.categories);
  const auto report = td::pipeline::evaluate(train, test, synth, a.options);
  const auto json = td::pipeline::to_json(report, a.options);
  if (a.out.empty()) {
    std::cout << json;
  } else {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw td::IoError("cannot open '" + a.out + "' for writing");
    os << json;
    if (!os) throw td::IoError("write failed for '" + a.out + "'");
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return kOk;
}

// ---- gradcheck ---------------------------------------------------------------

int run_gradcheck(const td::pipeline::GradcheckOptions& o) {
  td::pipeline::GradcheckResult r;
  try {
    r = td::pipeline::gradcheck(o);
  } catch (const td::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  std::printf("%-22s %8s %14s  %s\n", "group", "coords", "max_rel_err", "verdict");
  for (const auto& row : r.rows) {
    std::printf("%-22s %8zu %14.3e  %s\n", row.group.c_str(), row.coordinates, row.max_rel_error,
                row.pass ? "pass" : "FAIL");
  }
  std::printf("%zu parameters, tolerance %.0e: %s\n", r.param_count, o.tolerance, r.pass ? "PASS" : "FAIL");
  return r.pass ? kOk : kNumerical;
}

// ---- validate-schedule -------------------------------------------------------

int run_validate_schedule(int steps, const std::string& checkpoint) {
  td::DiffusionSchedule s;
  if (!checkpoint.empty()) {
    s = td::pipeline::load_checkpoint(checkpoint).schedule;
  } else {
    try {
      s = td::cosine_schedule(steps);
    } catch (const td::InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  const auto violations = td::validate(s);
  std::printf("T = %d, alpha_bar(T) = %.6e, posterior_var(1) = %.1e\n", s.total_steps,
              s.alpha_bar_at(s.total_steps), s.posterior_var_at(1));
  for (const auto& v : violations) std::printf("violation at %d [%s]: %s\n", v.index, v.rule.c_str(), v.detail.c_str());
  std::printf("%zu violation(s)\n", violations.size());
  return violations.empty() ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  td::tune_allocator();
  CLI::App app{"Mixed-type diffusion for multivariate time series"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "Write a synthetic corpus CSV and its stats sidecar");
  cmd_gen->add_option("--kind", gen.kind, "sine, markov or sine+markov")->capture_default_str();
  cmd_gen->add_option("--n", gen.spec.n, "Number of samples")->capture_default_str();
  cmd_gen->add_option("--numeric-channels", gen.spec.numeric_channels)->capture_default_str();
  cmd_gen->add_option("--categorical-channels", gen.spec.categorical_channels)->capture_default_str();
  cmd_gen->add_option("--categories", gen.spec.num_categories, "K per categorical channel")->capture_default_str();
  cmd_gen->add_option("--length", gen.spec.length)->capture_default_str();
  cmd_gen->add_option("--missing-rate", gen.spec.missing_rate)->capture_default_str();
  cmd_gen->add_option("--seed", gen.spec.seed)->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "Corpus CSV path (stats go to <out>.stats)")->required();
  cmd_gen->add_option("--test-out", gen.test_out, "Also hold out a test split at this path");
  cmd_gen->add_option("--test-fraction", gen.test_fraction)->capture_default_str();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Train a denoiser and write a checkpoint");
  cmd_train->add_option("--config", tr.config, "key=value config file");
  cmd_train->add_option("--corpus", tr.corpus, "Training corpus CSV");
  cmd_train->add_option("--out", tr.out, "Checkpoint path");
  cmd_train->add_option("--resume", tr.resume, "Continue from this checkpoint");
  cmd_train->add_option("--seed", tr.seed);
  cmd_train->add_option("--steps", tr.steps, "Optimizer step budget");
  cmd_train->add_option("--lambda", tr.lambda, "Weight of the discrete loss");
  cmd_train->add_option("--diffusion-steps", tr.diffusion_steps, "T");
  cmd_train->add_option("--batch", tr.batch, "Micro-batch size");
  cmd_train->add_option("--discrete-mode", tr.discrete_mode)->group("");  // test-only ablation

  SampleArgs sa;
  auto* cmd_sample = app.add_subcommand("sample", "Generate a synthetic corpus from a checkpoint");
  cmd_sample->add_option("--checkpoint", sa.checkpoint)->required();
  cmd_sample->add_option("--out", sa.out)->required();
  cmd_sample->add_option("--n", sa.n)->capture_default_str();
  cmd_sample->add_option("--seed", sa.seed)->capture_default_str();
  cmd_sample->add_option("--batch", sa.chunk, "Samples denoised together")->capture_default_str();

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Discriminative, predictive and NNAA metrics as JSON");
  cmd_eval->add_option("--real-train", ev.real_train)->required();
  cmd_eval->add_option("--real-test", ev.real_test)->required();
  cmd_eval->add_option("--synth", ev.synth)->required();
  cmd_eval->add_option("--out", ev.out, "Report path (stdout if omitted)");
  cmd_eval->add_option("--seed", ev.options.seed)->capture_default_str();
  cmd_eval->add_option("--reruns", ev.options.reruns)->capture_default_str();
  cmd_eval->add_option("--metric-steps", ev.options.trainer.steps)->capture_default_str();
  cmd_eval->add_option("--nnaa-points", ev.options.nnaa_max_points)->capture_default_str();

  td::pipeline::GradcheckOptions gc;
  auto* cmd_gc = app.add_subcommand("gradcheck", "Finite-difference check of the denoiser backward pass");
  cmd_gc->add_option("--seed", gc.seed)->capture_default_str();
  cmd_gc->add_option("--numeric-channels", gc.numeric_channels)->capture_default_str();
  cmd_gc->add_option("--categories", gc.categories, "K per discrete channel")->capture_default_str();
  cmd_gc->add_option("--length", gc.length)->capture_default_str();
  cmd_gc->add_option("--hidden", gc.hidden)->capture_default_str();
  cmd_gc->add_option("--embed-width", gc.embed_width)->capture_default_str();
  cmd_gc->add_option("--layers", gc.layers)->capture_default_str();
  cmd_gc->add_option("--batch", gc.batch)->capture_default_str();
  cmd_gc->add_option("--diffusion-steps", gc.diffusion_steps)->capture_default_str();
  cmd_gc->add_option("--lambda", gc.lambda)->capture_default_str();
  cmd_gc->add_option("--corrupt", gc.corrupt_group)->group("");  // test hook

  int vs_steps = 1000;
  std::string vs_checkpoint;
  auto* cmd_vs = app.add_subcommand("validate-schedule", "Check the schedule invariants");
  cmd_vs->add_option("--diffusion-steps", vs_steps)->capture_default_str();
  cmd_vs->add_option("--checkpoint", vs_checkpoint, "Validate the schedule stored in a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*cmd_gen) return run_gen_data(gen);
    if (*cmd_train) return run_train(tr);
    if (*cmd_sample) return run_sample(sa);
    if (*cmd_eval) return run_eval(ev);
    if (*cmd_gc) return run_gradcheck(gc);
    if (*cmd_vs) return run_validate_schedule(vs_steps, vs_checkpoint);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const td::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const td::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const td::IoError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const td::InvalidArgument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
