#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "timediff/data/csv.hpp"
#include "timediff/data/synthetic.hpp"
#include "timediff/error.hpp"
#include "timediff/pipeline/checkpoint.hpp"
#include "timediff/pipeline/config.hpp"
#include "timediff/pipeline/evaluate.hpp"
#include "timediff/pipeline/gradcheck.hpp"
#include "timediff/pipeline/model.hpp"
#include "timediff/pipeline/sampler.hpp"
#include "timediff/pipeline/trainer.hpp"

namespace td = timediff;
namespace pl = timediff::pipeline;
namespace data = timediff::data;
namespace fs = std::filesystem;

namespace {

data::Corpus tiny_corpus(int n = 48, std::uint64_t seed = 1) {
  data::MixedCorpusSpec spec;
  spec.n = n;
  spec.numeric_channels = 2;
  spec.categorical_channels = 1;
  spec.num_categories = 3;
  spec.length = 8;
  spec.missing_rate = 0.15;
  spec.seed = seed;
  return data::make_mixed_corpus(spec);
}

pl::TrainConfig tiny_config() {
  pl::TrainConfig c;
  c.diffusion_steps = 30;
  c.embed_width = 16;
  c.batch = 8;
  c.steps = 20;
  c.seed = 5;
  c.log_every = 0;
  c.checkpoint_every = 0;
  return c;
}

std::string bytes_of(const pl::Checkpoint& c) {
  std::ostringstream os(std::ios::binary);
  pl::write_checkpoint(os, c);
  return os.str();
}

pl::Checkpoint from_bytes(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return pl::read_checkpoint(is);
}

std::string csv_of(const data::Corpus& c) {
  std::ostringstream os;
  data::write_corpus(os, c);
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "timediff_pipeline_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, TextRoundTrip) {
  auto c = tiny_config();
  c.lambda = 0.25;
  c.corpus = "some/path.csv";
  c.discrete_mode = pl::DiscreteMode::gaussian_rounding;
  std::istringstream is(c.to_text());
  EXPECT_EQ(pl::TrainConfig::from_key_values(data::read_key_values(is)), c);
  const auto path = scratch("cfg.txt");
  std::ofstream(path) << c.to_text();
  EXPECT_EQ(pl::TrainConfig::from_file(path), c);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(pl::TrainConfig::from_key_values({{"lamda", "0.1"}}), td::ParseError);
  EXPECT_THROW(pl::TrainConfig::from_key_values({{"batch", "many"}}), td::ParseError);
  EXPECT_THROW(pl::parse_discrete_mode("bernoulli"), td::ParseError);
  auto c = tiny_config();
  c.diffusion_steps = 1;
  EXPECT_THROW(c.validate(), td::InvalidArgument);
  c = tiny_config();
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(), td::InvalidArgument);
  c = tiny_config();
  c.lambda = 0.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(Checkpoint, RoundTripIsByteExact) {
  const auto corpus = tiny_corpus();
  pl::Trainer trainer(pl::initial_state(tiny_config(), corpus), corpus);
  trainer.run(3);
  const auto bytes = bytes_of(trainer.state());
  const auto back = from_bytes(bytes);
  EXPECT_EQ(bytes_of(back), bytes);
  EXPECT_EQ(back.step, 3);
  EXPECT_EQ(back.loss_history.size(), 3u);
  EXPECT_EQ(back.config, trainer.state().config);
  EXPECT_EQ(back.layout.shape, trainer.state().layout.shape);
  EXPECT_EQ(bytes.substr(0, 8), std::string("TDIFFCK\0", 8));

  const auto path = scratch("round.ckpt");
  pl::save_checkpoint(path, back);
  EXPECT_EQ(bytes_of(pl::load_checkpoint(path)), bytes);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST(Checkpoint, CorruptInputsAreParseErrors) {
  const auto corpus = tiny_corpus();
  const auto bytes = bytes_of(pl::initial_state(tiny_config(), corpus));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(from_bytes(bad_magic), td::ParseError);
  std::string wrong_version = bytes;
  wrong_version[8] = 2;
  try {
    from_bytes(wrong_version);
    FAIL() << "expected ParseError";
  } catch (const td::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(from_bytes(bytes.substr(0, cut)), td::ParseError) << cut;
  }
  EXPECT_THROW(pl::load_checkpoint(scratch("does_not_exist.ckpt")), td::IoError);
}

TEST(Loss, ZeroLambdaGivesZeroLogitGradient) {
  const auto corpus = tiny_corpus();
  auto cfg = tiny_config();
  cfg.lambda = 0.0;
  const auto state = pl::initial_state(cfg, corpus);
  const td::Denoiser den(state.layout.shape);
  const auto samples = pl::to_model(data::encode(corpus, state.stats), state.layout);
  auto r1 = td::nn::RngStream::derive(1, "a"), r2 = td::nn::RngStream::derive(1, "b"),
       r3 = td::nn::RngStream::derive(1, "c");
  const auto batch = pl::draw_noised_batch(samples, 6, state.schedule, r1, r2, r3);
  const auto out = den.forward(state.params, den.pack(batch.xt, batch.ct), batch.t);
  const auto zero = pl::diffusion_loss(den, out, batch, state.schedule, 0.0);
  const int p_r = 2;
  EXPECT_EQ(zero.grad_output.bottomRows(zero.grad_output.rows() - p_r).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(zero.grad_output.topRows(p_r).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(zero.discrete, 0.0);
  EXPECT_DOUBLE_EQ(zero.total, zero.numeric);
  const auto some = pl::diffusion_loss(den, out, batch, state.schedule, 0.5);
  EXPECT_DOUBLE_EQ(some.total, some.numeric + 0.5 * some.discrete);
  EXPECT_GT(some.grad_output.bottomRows(some.grad_output.rows() - p_r).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Training, ResumeIsBitExact) {
  const auto corpus = tiny_corpus();
  const auto cfg = tiny_config();
  pl::Trainer straight(pl::initial_state(cfg, corpus), corpus);
  straight.run(12);

  pl::Trainer first(pl::initial_state(cfg, corpus), corpus);
  first.run(5);
  const auto path = scratch("half.ckpt");
  pl::save_checkpoint(path, first.state());
  pl::Trainer second(pl::load_checkpoint(path), corpus);
  second.run(12);
  EXPECT_EQ(bytes_of(second.state()), bytes_of(straight.state()));
}

TEST(Training, ResumeAgainstAnotherCorpusIsRejected) {
  const auto corpus = tiny_corpus();
  const auto state = pl::initial_state(tiny_config(), corpus);
  EXPECT_THROW(pl::Trainer(state, tiny_corpus(48, 2)), td::InvalidArgument);
}

TEST(Training, NonFiniteLossStopsWithStepAndKeepsLastCheckpoint) {
  const auto corpus = tiny_corpus();
  auto cfg = tiny_config();
  cfg.checkpoint = scratch("fault.ckpt").string();
  cfg.checkpoint_every = 5;
  fs::remove(cfg.checkpoint);
  pl::Trainer trainer(pl::initial_state(cfg, corpus), corpus);
  trainer.set_loss_fault([](std::int64_t step, double loss) {
    return step == 12 ? std::numeric_limits<double>::quiet_NaN() : loss;
  });
  try {
    trainer.run(cfg.steps, [&](const pl::StepReport& r) {
      if (r.step % cfg.checkpoint_every == 0) pl::save_checkpoint(cfg.checkpoint, trainer.state());
    });
    FAIL() << "expected NumericalError";
  } catch (const td::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 12"), std::string::npos) << e.what();
  }
  EXPECT_EQ(trainer.step(), 11);
  EXPECT_EQ(pl::load_checkpoint(cfg.checkpoint).step, 10);
  // The failed step left no trace: continuing without the fault matches a clean run.
  trainer.set_loss_fault({});
  trainer.run(13);
  pl::Trainer clean(pl::initial_state(cfg, corpus), corpus);
  clean.run(13);
  EXPECT_EQ(bytes_of(trainer.state()), bytes_of(clean.state()));
}

TEST(Training, LossDecreases) {
  const auto corpus = tiny_corpus(128);
  auto cfg = tiny_config();
  cfg.steps = 1000;
  cfg.learning_rate = 1e-3;
  const auto state = pl::train(pl::initial_state(cfg, corpus), corpus);
  const auto& h = state.loss_history;
  ASSERT_EQ(h.size(), 1000u);
  const double early = std::accumulate(h.begin(), h.begin() + 100, 0.0) / 100.0;
  const double late = std::accumulate(h.end() - 100, h.end(), 0.0) / 100.0;
  EXPECT_LT(late, early);
}

TEST(Sampling, DeterministicWithRequestedShape) {
  const auto corpus = tiny_corpus();
  pl::Trainer trainer(pl::initial_state(tiny_config(), corpus), corpus);
  trainer.run(4);
  pl::SampleOptions opt;
  opt.count = 10;
  opt.seed = 3;
  opt.chunk = 4;
  const auto a = pl::sample(trainer.state(), opt);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_TRUE(a.same_layout(corpus));
  EXPECT_NO_THROW(a.check());
  EXPECT_EQ(csv_of(a), csv_of(pl::sample(trainer.state(), opt)));
  opt.chunk = 10;
  EXPECT_EQ(csv_of(a), csv_of(pl::sample(trainer.state(), opt)));
  opt.seed = 4;
  EXPECT_NE(csv_of(a), csv_of(pl::sample(trainer.state(), opt)));
  const auto& st = trainer.state().stats;
  for (const auto& s : a.samples) {
    for (Eigen::Index p = 0; p < s.values.rows(); ++p) {
      for (Eigen::Index l = 0; l < s.values.cols(); ++l) {
        if (s.mask(p, l) != 0) {
          EXPECT_TRUE(std::isnan(s.values(p, l)));
        } else {
          EXPECT_GE(s.values(p, l), st.min[static_cast<std::size_t>(p)]);
          EXPECT_LE(s.values(p, l), st.max[static_cast<std::size_t>(p)]);
        }
      }
    }
  }
}

TEST(RoundingVariant, LayoutKeepsHiddenWidthAndRoundTrips) {
  const auto corpus = tiny_corpus();
  auto cfg = tiny_config();
  const auto multi = pl::ModelLayout::make(data::EncodedLayout::of(corpus), cfg);
  cfg.discrete_mode = pl::DiscreteMode::gaussian_rounding;
  const auto round = pl::ModelLayout::make(data::EncodedLayout::of(corpus), cfg);
  EXPECT_EQ(multi.shape.input_width(), 2 + 3 + 2 + 2);
  EXPECT_EQ(round.shape.numeric_channels, 2 + 3);
  EXPECT_TRUE(round.shape.categories.empty());
  EXPECT_EQ(round.shape.hidden, multi.shape.hidden);

  const auto enc = data::encode(corpus, data::compute_stats(corpus));
  for (const auto& e : enc) {
    const auto m = pl::to_model(e, round);
    EXPECT_EQ(m.x0.rows(), 5);
    const auto back = pl::from_model(m.x0, m.c0, round);
    EXPECT_EQ(back.c0, e.c0);
  }
  auto m = pl::to_model(enc[0], round);
  m.x0(2, 0) = 0.74;   // K = 3: nearest category 1
  m.x0(3, 0) = 1.6;    // mask channel, clipped to 1
  m.x0(4, 0) = -0.4;   // clipped to 0
  const auto back = pl::from_model(m.x0, m.c0, round);
  EXPECT_EQ(back.c0(0, 0), 1);
  EXPECT_EQ(back.c0(1, 0), 1);
  EXPECT_EQ(back.c0(2, 0), 0);

  const auto state = pl::initial_state(cfg, corpus);
  pl::Trainer trainer(state, corpus);
  trainer.run(2);
  pl::SampleOptions opt;
  opt.count = 5;
  const auto s = pl::sample(trainer.state(), opt);
  EXPECT_NO_THROW(s.check());
  EXPECT_TRUE(s.same_layout(corpus));
}

TEST(Gradcheck, PassesAndCatchesCorruption) {
  pl::GradcheckOptions opt;
  const auto ok = pl::gradcheck(opt);
  EXPECT_TRUE(ok.pass);
  EXPECT_GT(ok.param_count, 0u);
  for (const auto& r : ok.rows) EXPECT_LT(r.max_rel_error, opt.tolerance) << r.group;
  opt.corrupt_group = "rnn.l0.fwd.gate_o";
  const auto bad = pl::gradcheck(opt);
  EXPECT_FALSE(bad.pass);
  for (const auto& r : bad.rows) EXPECT_EQ(r.pass, r.group != opt.corrupt_group) << r.group;
  opt.corrupt_group.clear();
  opt.max_params = 100;
  EXPECT_THROW(pl::gradcheck(opt), td::InvalidArgument);
}

TEST(Evaluate, JsonReportIsValidAndDeterministic) {
  const auto train = tiny_corpus(60, 1);
  const auto test = tiny_corpus(60, 2);
  const auto synth = tiny_corpus(60, 3);
  pl::EvalOptions opt;
  opt.reruns = 2;
  opt.seed = 9;
  opt.trainer.steps = 20;
  opt.trainer.batch = 16;
  const auto r = pl::evaluate(train, test, synth, opt);
  const auto text = pl::to_json(r, opt);
  EXPECT_EQ(text, pl::to_json(pl::evaluate(train, test, synth, opt), opt));
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("discriminative").at("values").size(), 2u);
  EXPECT_EQ(j.at("predictive").at("seeds").size(), 2u);
  EXPECT_TRUE(j.contains("predictive_baseline"));
  EXPECT_EQ(j.at("nnaa").at("points").get<int>(), 60);
  EXPECT_TRUE(j.at("warnings").empty());
  const double d = j.at("discriminative").at("mean").get<double>();
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 0.5);
}

TEST(Evaluate, CopiedTrainingSetRaisesOverfitWarning) {
  const auto train = tiny_corpus(40, 1);
  const auto test = tiny_corpus(40, 2);
  pl::EvalOptions opt;
  opt.reruns = 1;
  opt.discriminative = false;
  opt.predictive = false;
  const auto r = pl::evaluate(train, test, train, opt);
  EXPECT_EQ(r.nnaa.aa_train, 0.0);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("overfit"), std::string::npos);
}

TEST(Evaluate, LayoutMismatchIsRejected) {
  const auto train = tiny_corpus(40, 1);
  data::MixedCorpusSpec spec;
  spec.n = 40;
  spec.length = 9;
  spec.numeric_channels = 2;
  spec.num_categories = 3;
  const auto other = data::make_mixed_corpus(spec);
  pl::EvalOptions opt;
  opt.reruns = 1;
  EXPECT_THROW(pl::evaluate(train, train, other, opt), td::InvalidArgument);
}
