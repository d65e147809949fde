#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "timediff/data/corpus.hpp"
#include "timediff/data/csv.hpp"
#include "timediff/data/synthetic.hpp"
#include "timediff/error.hpp"

namespace td = timediff;
namespace data = timediff::data;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

data::Corpus small_mixed(int n = 40, double missing = 0.2, std::uint64_t seed = 3) {
  data::MixedCorpusSpec spec;
  spec.n = n;
  spec.numeric_channels = 2;
  spec.categorical_channels = 2;
  spec.num_categories = 3;
  spec.length = 6;
  spec.missing_rate = missing;
  spec.seed = seed;
  return data::make_mixed_corpus(spec);
}

bool same_values(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && x != y) return false;
  }
  return true;
}

std::string csv_of(const data::Corpus& c) {
  std::ostringstream os;
  data::write_corpus(os, c);
  return os.str();
}

int parse_error_line(const std::string& text) {
  std::istringstream is(text);
  try {
    data::read_corpus(is);
  } catch (const td::ParseError& e) {
    return static_cast<int>(e.line());
  }
  return -1;
}

}  // namespace

TEST(CorpusCsv, RoundTripIsExact) {
  const auto c = small_mixed();
  std::istringstream is(csv_of(c));
  const auto back = data::read_corpus(is);
  ASSERT_TRUE(back.same_layout(c));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.samples[i].id, c.samples[i].id);
    EXPECT_TRUE(same_values(back.samples[i].values, c.samples[i].values));
    EXPECT_EQ(back.samples[i].mask, c.samples[i].mask);
    EXPECT_EQ(back.samples[i].categories, c.samples[i].categories);
  }
  EXPECT_EQ(csv_of(back), csv_of(c));
}

TEST(CorpusCsv, MalformedInputReportsLine) {
  const std::string header = "sample_id,channel,kind,t0,t1\n";
  EXPECT_EQ(parse_error_line(header + "0,0,num,1.0,2.0\n0,0,cat,1\n"), 3);
  EXPECT_EQ(parse_error_line(header + "0,0,num,1.0,abc\n"), 2);
  EXPECT_EQ(parse_error_line(header + "0,0,weird,1,1\n"), 2);
  EXPECT_EQ(parse_error_line(header + "0,0,mask,1,2\n"), 2);
  EXPECT_EQ(parse_error_line(header + "0,0,cat,-1,0\n"), 2);
  EXPECT_EQ(parse_error_line("id,channel,kind,t0\n"), 1);
  EXPECT_EQ(parse_error_line("sample_id,channel,kind,t1\n"), 1);
  EXPECT_EQ(parse_error_line(header + "0,0,num,1,2\n1,0,num,1,2\n0,0,num,1,2\n"), 4);
  // Layout errors are not tied to one line.
  EXPECT_EQ(parse_error_line(header + "0,0,num,1,2\n1,0,num,1,2\n1,1,num,1,2\n"), 0);
}

TEST(CorpusCsv, EmptyAndHeaderOnlyFilesAreEmptyCorpora) {
  std::istringstream empty("");
  EXPECT_TRUE(data::read_corpus(empty).empty());
  std::istringstream header("sample_id,channel,kind,t0,t1,t2\n");
  const auto c = data::read_corpus(header);
  EXPECT_TRUE(c.empty());
  EXPECT_EQ(c.length, 3);
}

TEST(CorpusCsv, MasksComeFromEmptyCellsAndMaskRows) {
  std::istringstream is(
      "sample_id,channel,kind,t0,t1,t2\n"
      "5,0,num,1.5,,2.5\n"
      "5,0,cat,0,4,1\n"
      "5,0,mask,0,0,1\n");
  const auto c = data::read_corpus(is, {7});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.categories, std::vector<int>{7});
  const auto& s = c.samples[0];
  EXPECT_EQ(s.mask, (Eigen::MatrixXi(1, 3) << 0, 1, 1).finished());
  EXPECT_EQ(s.values(0, 0), 1.5);
  EXPECT_TRUE(std::isnan(s.values(0, 1)));
  EXPECT_TRUE(std::isnan(s.values(0, 2)));
  std::istringstream inferred("sample_id,channel,kind,t0\n0,0,cat,4\n");
  EXPECT_EQ(data::read_corpus(inferred).categories, std::vector<int>{5});
}

TEST(CorpusCsv, MissingFileIsIoError) {
  EXPECT_THROW(data::read_corpus(std::filesystem::path("/nonexistent/x.csv")), td::IoError);
}

TEST(DeriveMask, MarksNaNAndFullyMissingChannels) {
  Eigen::MatrixXd raw(3, 3);
  raw << 1, kNaN, 3, kNaN, kNaN, kNaN, 0, 0, 0;
  const auto d = data::derive_mask(raw);
  EXPECT_EQ(d.mask, (Eigen::MatrixXi(3, 3) << 0, 1, 0, 1, 1, 1, 0, 0, 0).finished());
  EXPECT_EQ(d.fully_missing_channels, std::vector<int>{1});
}

TEST(Scaling, StatsImputeScaleAndDescale) {
  data::Corpus c;
  c.numeric_channels = 2;
  c.length = 3;
  data::TimeSeriesSample s;
  s.values.resize(2, 3);
  s.values << 1, 3, kNaN, 7, 7, 7;
  s.mask = data::derive_mask(s.values).mask;
  s.categories.resize(0, 3);
  c.samples.push_back(s);
  const auto st = data::compute_stats(c);
  EXPECT_EQ(st.min, (std::vector<double>{1, 7}));
  EXPECT_EQ(st.max, (std::vector<double>{3, 7}));
  EXPECT_EQ(st.mean, (std::vector<double>{2, 7}));
  const auto x = data::impute_and_scale(s.values, s.mask, st);
  EXPECT_EQ(x, (Eigen::MatrixXd(2, 3) << 0, 1, 0.5, 0.5, 0.5, 0.5).finished());
  const auto back = data::descale(x, st);
  EXPECT_EQ(back, (Eigen::MatrixXd(2, 3) << 1, 3, 2, 7, 7, 7).finished());
  EXPECT_THROW(data::impute_and_scale(s.values, Eigen::MatrixXi::Zero(2, 2), st), td::InvalidArgument);
}

TEST(Scaling, FullyMissingChannelGetsZeroStats) {
  data::Corpus c;
  c.numeric_channels = 1;
  c.length = 2;
  data::TimeSeriesSample s;
  s.values = Eigen::MatrixXd::Constant(1, 2, kNaN);
  s.mask = Eigen::MatrixXi::Ones(1, 2);
  s.categories.resize(0, 2);
  c.samples.push_back(s);
  const auto st = data::compute_stats(c);
  EXPECT_EQ(st.min[0], 0.0);
  EXPECT_EQ(st.max[0], 0.0);
  EXPECT_EQ(st.mean[0], 0.0);
}

TEST(Encoding, MaskChannelsFollowCategoricalChannels) {
  const auto c = small_mixed();
  const auto layout = data::EncodedLayout::of(c);
  EXPECT_EQ(layout.categories, (std::vector<int>{3, 3, 2, 2}));
  const auto st = data::compute_stats(c);
  const auto enc = data::encode(c, st);
  ASSERT_EQ(enc.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(enc[i].c0.topRows(2), c.samples[i].categories);
    EXPECT_EQ(enc[i].c0.bottomRows(2), c.samples[i].mask);
    EXPECT_GE(enc[i].x0.minCoeff(), 0.0);
    EXPECT_LE(enc[i].x0.maxCoeff(), 1.0);
  }
  const auto dec = data::decode(enc, layout, st);
  ASSERT_TRUE(dec.same_layout(c));
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(dec.samples[i].mask, c.samples[i].mask);
    EXPECT_EQ(dec.samples[i].categories, c.samples[i].categories);
    const auto& a = dec.samples[i].values;
    const auto& b = c.samples[i].values;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (std::isnan(b.data()[k])) {
        EXPECT_TRUE(std::isnan(a.data()[k]));
      } else {
        EXPECT_NEAR(a.data()[k], b.data()[k], 1e-12);
      }
    }
  }
}

TEST(Encoding, DecodeClipsToTrainingRange) {
  const auto c = small_mixed(5, 0.0);
  const auto st = data::compute_stats(c);
  auto enc = data::encode(c, st);
  enc[0].x0(0, 0) = 1.7;
  enc[0].x0(1, 0) = -0.3;
  const auto dec = data::decode(enc, data::EncodedLayout::of(c), st);
  EXPECT_EQ(dec.samples[0].values(0, 0), st.max[0]);
  EXPECT_EQ(dec.samples[0].values(1, 0), st.min[1]);
}

TEST(Split, DeterministicPartition) {
  const auto c = small_mixed(50);
  const auto [a, b] = data::split(c, 0.8, 11);
  const auto [a2, b2] = data::split(c, 0.8, 11);
  const auto [a3, b3] = data::split(c, 0.8, 12);
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(b.size(), 10u);
  std::set<std::int64_t> ids;
  std::vector<std::int64_t> first, first2, first3;
  for (const auto& s : a.samples) {
    ids.insert(s.id);
    first.push_back(s.id);
  }
  for (const auto& s : b.samples) ids.insert(s.id);
  for (const auto& s : a2.samples) first2.push_back(s.id);
  for (const auto& s : a3.samples) first3.push_back(s.id);
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(first, first2);
  EXPECT_NE(first, first3);
  EXPECT_THROW(data::split(c, 1.5, 0), td::InvalidArgument);
}

TEST(Synthetic, DeterministicGivenSeed) {
  const auto a = small_mixed(30, 0.15, 9);
  const auto b = small_mixed(30, 0.15, 9);
  const auto d = small_mixed(30, 0.15, 10);
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_NE(csv_of(a), csv_of(d));
}

TEST(Synthetic, ZeroMissingRateGivesNoMissingEntries) {
  const auto c = small_mixed(100, 0.0);
  for (const auto& s : c.samples) {
    EXPECT_EQ(s.mask.sum(), 0);
    EXPECT_TRUE(s.values.allFinite());
  }
}

TEST(Synthetic, MissingRateMatchesMcarProbability) {
  const auto c = small_mixed(2000, 0.15);
  double missing = 0, total = 0;
  for (const auto& s : c.samples) {
    missing += s.mask.sum();
    total += static_cast<double>(s.mask.size());
  }
  // 24000 Bernoulli draws: standard error ~0.0023.
  EXPECT_NEAR(missing / total, 0.15, 0.01);
}

TEST(Synthetic, MarkovChainsStayWithProbabilityPointEight) {
  const auto chains = data::make_markov_corpus(3000, 1, 20, 3, 5);
  double stay = 0, moves = 0;
  std::vector<double> first(3, 0.0);
  for (const auto& s : chains) {
    ++first[static_cast<std::size_t>(s.categories(0, 0))];
    for (int l = 1; l < 20; ++l) {
      stay += s.categories(0, l) == s.categories(0, l - 1) ? 1 : 0;
      ++moves;
    }
  }
  // 57000 transitions: standard error ~0.0017.
  EXPECT_NEAR(stay / moves, data::kMarkovStay, 0.008);
  for (double f : first) EXPECT_NEAR(f / 3000.0, 1.0 / 3.0, 0.04);
}

TEST(Synthetic, SineValuesStayWithinAmplitudeBounds) {
  const auto sines = data::make_sine_corpus(200, 2, 24, 4);
  for (const auto& s : sines) {
    EXPECT_LE(s.values.cwiseAbs().maxCoeff(), 1.0 + 5 * 0.02);
    EXPECT_EQ(s.mask.sum(), 0);
  }
  EXPECT_THROW(data::make_markov_corpus(1, 1, 4, 1, 0), td::InvalidArgument);
}

TEST(StatsSidecar, RoundTrip) {
  const auto c = small_mixed();
  data::StatsSidecar sc{data::compute_stats(c), c.categories};
  const auto path = std::filesystem::temp_directory_path() / "timediff_stats_roundtrip.txt";
  data::write_stats(path, sc);
  const auto back = data::read_stats(path);
  EXPECT_EQ(back.stats.min, sc.stats.min);
  EXPECT_EQ(back.stats.max, sc.stats.max);
  EXPECT_EQ(back.stats.mean, sc.stats.mean);
  EXPECT_EQ(back.categories, sc.categories);
  std::ofstream(path) << "numeric_channels=1\ncategorical_channels=0\n";
  EXPECT_THROW(data::read_stats(path), td::ParseError);
  std::filesystem::remove(path);
}

TEST(KeyValues, CommentsDuplicatesAndMalformedLines) {
  std::istringstream ok("# c\n a = 1 \n\nb=two\n");
  const auto kv = data::read_key_values(ok);
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two");
  std::istringstream dup("a=1\na=2\n");
  EXPECT_THROW(data::read_key_values(dup), td::ParseError);
  std::istringstream bad("a=1\nnoequals\n");
  try {
    data::read_key_values(bad);
    FAIL();
  } catch (const td::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
