#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "test_util.hpp"
#include "timediff/error.hpp"
#include "timediff/nn/activations.hpp"
#include "timediff/nn/gru.hpp"
#include "timediff/nn/optim.hpp"
#include "timediff/nn/param_store.hpp"
#include "timediff/nn/rng.hpp"

namespace td = timediff;
namespace nn = timediff::nn;

namespace {

nn::ParamStore two_tensors() {
  nn::ParamStore p;
  p.add("a", 2, 3);
  p.add("b", 4, 1);
  return p;
}

}  // namespace

TEST(ParamStore, LayoutAndArithmetic) {
  auto p = two_tensors();
  EXPECT_EQ(p.scalar_count(), 10u);
  EXPECT_EQ(p.index_of("b"), 1u);
  EXPECT_THROW(p.index_of("c"), td::InvalidArgument);
  EXPECT_THROW(p.add("a", 1, 1), td::InvalidArgument);
  p.at("a").setConstant(2.0);
  p.at("b").setConstant(-1.0);
  auto q = p.zeros_like();
  EXPECT_TRUE(q.same_layout(p));
  EXPECT_EQ(q[0].squaredNorm(), 0.0);
  q.add_scaled(p, 0.5);
  EXPECT_EQ(q.at("a")(1, 2), 1.0);
  q.scale(4.0);
  EXPECT_EQ(q.at("b")(3, 0), -2.0);
  EXPECT_TRUE(q.all_finite());
  q.at("b")(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(q.all_finite());
  q.set_zero();
  EXPECT_TRUE(q.all_finite());

  nn::ParamStore other;
  other.add("a", 2, 3);
  other.add("b", 4, 2);
  EXPECT_FALSE(other.same_layout(p));
  EXPECT_THROW(nn::require_same_layout(other, p, "test"), td::InvalidArgument);
}

TEST(Adam, FirstStepsMatchHandComputation) {
  nn::ParamStore p;
  p.add("w", 1, 1);
  p[0](0, 0) = 1.0;
  auto g = p.zeros_like();
  const nn::AdamConfig cfg{0.1, 0.9, 0.99, 1e-8};
  nn::Adam adam(p, cfg);
  double m = 0.0, v = 0.0, w = 1.0;
  const double grads[] = {0.5, -2.0, 0.25};
  for (int k = 0; k < 3; ++k) {
    g[0](0, 0) = grads[k];
    adam.step(p, g);
    m = 0.9 * m + 0.1 * grads[k];
    v = 0.99 * v + 0.01 * grads[k] * grads[k];
    const double mh = m / (1.0 - std::pow(0.9, k + 1));
    const double vh = v / (1.0 - std::pow(0.99, k + 1));
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p[0](0, 0), w, 1e-14);
  }
  EXPECT_EQ(adam.state().step, 3);
  // The first bias-corrected step moves by lr * sign(g).
  nn::ParamStore q;
  q.add("w", 1, 1);
  nn::Adam fresh(q, cfg);
  auto gq = q.zeros_like();
  gq[0](0, 0) = 123.0;
  fresh.step(q, gq);
  EXPECT_NEAR(q[0](0, 0), -0.1, 1e-9);
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
  auto p = two_tensors();
  p.at("a").setConstant(0.3);
  nn::Adam adam(p);
  auto g = p.zeros_like();
  g.at("a").setConstant(1.0);
  adam.step(p, g);
  const auto before = p;
  const auto state_before = adam.state();
  g.at("b")(2, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam.step(p, g);
    FAIL() << "expected NumericalError";
  } catch (const td::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], before[i]);
  EXPECT_EQ(adam.state().step, state_before.step);
  EXPECT_EQ(adam.state().first_moment[0], state_before.first_moment[0]);
  auto wrong = two_tensors();
  wrong.add("c", 1, 1);
  EXPECT_THROW(adam.step(p, wrong), td::InvalidArgument);
}

TEST(Ema, ConvergesGeometricallyToFixedParams) {
  nn::ParamStore p;
  p.add("w", 1, 1);
  p[0](0, 0) = 1.0;
  nn::Ema ema(p, 0.995);
  p[0](0, 0) = 3.0;
  for (int n = 1; n <= 500; ++n) {
    ema.update(p);
    if (n % 100 == 0) {
      const double expected = 3.0 + (1.0 - 3.0) * std::pow(0.995, n);
      EXPECT_NEAR(ema.shadow()[0](0, 0), expected, 1e-12);
    }
  }
}

TEST(GradAccumulator, StepsWithTheMeanEveryPeriod) {
  nn::ParamStore p;
  p.add("w", 1, 1);
  nn::ParamStore direct = p;
  nn::Adam a1(p), a2(direct);
  nn::GradAccumulator acc(p, 2);
  auto g = p.zeros_like();
  g[0](0, 0) = 1.0;
  EXPECT_FALSE(acc.accumulate_and_maybe_step(g, p, a1));
  EXPECT_EQ(acc.pending(), 1);
  EXPECT_EQ(p[0](0, 0), 0.0);
  g[0](0, 0) = 3.0;
  EXPECT_TRUE(acc.accumulate_and_maybe_step(g, p, a1));
  EXPECT_EQ(acc.pending(), 0);
  g[0](0, 0) = 2.0;
  a2.step(direct, g);
  EXPECT_EQ(p[0](0, 0), direct[0](0, 0));
  EXPECT_DOUBLE_EQ(a1.state().first_moment[0](0, 0), a2.state().first_moment[0](0, 0));
}

TEST(RngStream, DeterministicAndRestorable) {
  auto a = nn::RngStream::derive(42, "data");
  auto b = nn::RngStream::derive(42, "data");
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  for (int i = 0; i < 10; ++i) a.normal();
  const nn::RngStream resumed(a.key(), a.counter());
  auto copy = resumed;
  for (int i = 0; i < 50; ++i) ASSERT_EQ(a.uniform(), copy.uniform());
}

TEST(RngStream, NamedStreamsAndSeedsDiffer) {
  std::set<std::uint64_t> firsts;
  for (auto name : {nn::streams::kInit, nn::streams::kData, nn::streams::kGaussian, nn::streams::kCategorical}) {
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) firsts.insert(nn::RngStream::derive(seed, name).next_u64());
  }
  EXPECT_EQ(firsts.size(), 12u);
}

TEST(RngStream, DistributionMoments) {
  auto rng = nn::RngStream::derive(3, "moments");
  const int n = 200000;
  double s = 0, ss = 0, u = 0, k4 = 0;
  std::vector<int> counts(7, 0);
  bool in_range = true;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
    k4 += z * z * z * z;
    const double x = rng.uniform();
    in_range = in_range && x >= 0.0 && x < 1.0;
    u += x;
    const double y = rng.uniform_open_low();
    in_range = in_range && y > 0.0 && y <= 1.0;
    ++counts[rng.uniform_index(7)];
  }
  EXPECT_TRUE(in_range);
  // Tolerances are about 4.5 standard errors.
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.015);
  EXPECT_NEAR(k4 / n, 3.0, 0.05);
  EXPECT_NEAR(u / n, 0.5, 0.003);
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 7.0, 0.0035);
  EXPECT_THROW(rng.uniform_index(0), td::InvalidArgument);
}

TEST(Activations, VectorisedTanhAndSigmoidMatchLibm) {
  Eigen::ArrayXXd x(1, 9);
  x << -40.0, -5.0, -1.0, -1e-9, 0.0, 1e-9, 0.7, 5.0, 40.0;
  const Eigen::ArrayXXd t = nn::tanh(x);
  const Eigen::ArrayXXd s = nn::sigmoid(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    EXPECT_NEAR(t(0, j), std::tanh(x(0, j)), 1e-15);
    EXPECT_NEAR(s(0, j), 1.0 / (1.0 + std::exp(-x(0, j))), 1e-15);
  }
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  nn::ParamStore p;
  nn::Gru gru(p, "g.", 3, 5);
  auto rng = nn::RngStream::derive(9, "gru");
  gru.initialize(p, rng);
  const int batch = 2, length = 4;
  const Eigen::MatrixXd x = td::test::random_matrix(3, batch * length, rng);
  const Eigen::MatrixXd probe = td::test::random_matrix(5, batch * length, rng);
  nn::Gru::Trace trace;
  gru.forward(p, x, batch, &trace);
  auto g = p.zeros_like();
  gru.backward(p, trace, probe, batch, g);
  auto f = [&] { return (gru.forward(p, x, batch, nullptr).array() * probe.array()).sum(); };
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index k = 0; k < p[i].size(); ++k) {
      const double saved = p[i].data()[k];
      p[i].data()[k] = saved + h;
      const double up = f();
      p[i].data()[k] = saved - h;
      const double down = f();
      p[i].data()[k] = saved;
      EXPECT_NEAR(g[i].data()[k], (up - down) / (2 * h), 1e-7) << p.name(i) << "[" << k << "]";
    }
  }
}

TEST(Gru, BatchColumnsAreIndependent) {
  nn::ParamStore p;
  nn::Gru gru(p, "g.", 2, 4);
  auto rng = nn::RngStream::derive(10, "gru");
  gru.initialize(p, rng);
  const Eigen::MatrixXd x = td::test::random_matrix(2, 2 * 3, rng);
  const Eigen::MatrixXd both = gru.forward(p, x, 2, nullptr);
  Eigen::MatrixXd first(2, 3);
  for (int l = 0; l < 3; ++l) first.col(l) = x.col(2 * l);
  const Eigen::MatrixXd alone = gru.forward(p, first, 1, nullptr);
  for (int l = 0; l < 3; ++l) EXPECT_LT((alone.col(l) - both.col(2 * l)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(gru.forward(p, x, 4, nullptr), td::InvalidArgument);
}
