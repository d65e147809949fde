#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "timediff/error.hpp"
#include "timediff/multinomial.hpp"

namespace td = timediff;
using td::test::random_hard_lattice;
using td::test::random_lattice;

namespace {

// Q_t[i][j] = P(c_t = j | c_{t-1} = i).
Eigen::MatrixXd transition(int k, double beta) {
  return (1.0 - beta) * Eigen::MatrixXd::Identity(k, k) + Eigen::MatrixXd::Constant(k, k, beta / k);
}

// Row-vector marginal after t steps, by composing transition matrices.
Eigen::RowVectorXd brute_marginal(const Eigen::RowVectorXd& c0, int t, const td::DiffusionSchedule& s) {
  Eigen::RowVectorXd v = c0;
  for (int k = 1; k <= t; ++k) v = v * transition(static_cast<int>(c0.size()), s.beta_at(k));
  return v;
}

// q(c_{t-1} = j | c_t, c0) by Bayes' rule on the brute-force kernels. c_t is
// one-hot, c0 may be soft.
Eigen::RowVectorXd brute_posterior(const Eigen::RowVectorXd& ct, const Eigen::RowVectorXd& c0, int t,
                                   const td::DiffusionSchedule& s) {
  const int k = static_cast<int>(ct.size());
  const Eigen::MatrixXd q = transition(k, s.beta_at(t));
  const Eigen::RowVectorXd prior = brute_marginal(c0, t - 1, s);
  Eigen::RowVectorXd post(k);
  for (int j = 0; j < k; ++j) post(j) = prior(j) * q.row(j).dot(ct);
  return post / post.sum();
}

td::OneHotSequence single(const Eigen::VectorXd& v) {
  td::OneHotSequence s;
  s.channels.emplace_back(v);
  return s;
}

}  // namespace

TEST(OneHot, EncodeDecodeRoundTrip) {
  td::CategoryMatrix c(2, 4);
  c << 0, 1, 2, 1, 3, 0, 0, 2;
  const std::vector<int> ks = {3, 4};
  const auto s = td::one_hot_encode(c, ks);
  EXPECT_TRUE(s.hard);
  EXPECT_EQ(s.categories(), ks);
  EXPECT_EQ(td::one_hot_decode(s), c);
  EXPECT_TRUE(td::check_lattice(s).empty());
  td::CategoryMatrix bad = c;
  bad(0, 0) = 3;
  EXPECT_THROW(td::one_hot_encode(bad, ks), td::InvalidArgument);
}

TEST(OneHot, CheckLatticeFlagsBrokenSlices) {
  td::nn::RngStream rng(1);
  auto s = random_lattice({3}, 5, rng);
  EXPECT_TRUE(td::check_lattice(s).empty());
  s.channels[0](0, 2) += 0.1;
  EXPECT_EQ(td::check_lattice(s).size(), 1u);
  auto hard = random_hard_lattice({3}, 5, rng);
  hard.channels[0].col(1).setConstant(1.0 / 3.0);
  EXPECT_EQ(td::check_lattice(hard).size(), 1u);
}

TEST(QMarginal, MatchesTransitionMatrixComposition) {
  td::nn::RngStream rng(2);
  for (int T = 2; T <= 10; ++T) {
    const auto s = td::cosine_schedule(T);
    for (int k = 2; k <= 4; ++k) {
      const auto c0 = random_lattice({k}, 3, rng);
      for (int t = 0; t <= T; ++t) {
        const auto m = td::q_marginal_probs(c0, t, s);
        for (int l = 0; l < 3; ++l) {
          const Eigen::RowVectorXd want = brute_marginal(c0.channels[0].col(l).transpose(), t, s);
          EXPECT_LT((m.channels[0].col(l).transpose() - want).cwiseAbs().maxCoeff(), 1e-12)
              << "T=" << T << " K=" << k << " t=" << t;
          EXPECT_NEAR(m.channels[0].col(l).sum(), 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(QForwardStep, IsOneTransitionMatrixApplication) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(3);
  const auto c = random_lattice({4}, 2, rng);
  const auto next = td::q_forward_step_probs(c, 6, s);
  for (int l = 0; l < 2; ++l) {
    const Eigen::RowVectorXd want = c.channels[0].col(l).transpose() * transition(4, s.beta_at(6));
    EXPECT_LT((next.channels[0].col(l).transpose() - want).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(QPosterior, MatchesBayesInversion) {
  td::nn::RngStream rng(4);
  for (int T : {2, 5, 10}) {
    const auto s = td::cosine_schedule(T);
    for (int k = 2; k <= 4; ++k) {
      for (int t = 1; t <= T; ++t) {
        const auto ct = random_hard_lattice({k}, 4, rng);
        const auto c0 = random_lattice({k}, 4, rng);
        const auto post = td::q_posterior(ct, c0, t, s);
        for (int l = 0; l < 4; ++l) {
          const Eigen::RowVectorXd want =
              brute_posterior(ct.channels[0].col(l).transpose(), c0.channels[0].col(l).transpose(), t, s);
          EXPECT_LT((post.normalized[0].col(l).transpose() - want).cwiseAbs().maxCoeff(), 1e-10)
              << "T=" << T << " K=" << k << " t=" << t;
          EXPECT_NEAR(post.normalized[0].col(l).sum(), 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(QPosterior, ZeroMassSliceIsAContractViolation) {
  const auto s = td::cosine_schedule(10);
  const auto ct = single(Eigen::Vector2d(1.0, 0.0));
  // t = 1 puts all prior mass on c0; with alpha_1 close to 1 a zero c0 slice
  // leaves nothing to normalise.
  const auto c0 = single(Eigen::Vector2d(0.0, 0.0));
  EXPECT_THROW(td::q_posterior(ct, c0, 1, s), td::ContractViolation);
}

TEST(Softmax, NormalisesAndRejectsNonFinite) {
  td::CategoryLogits logits = {Eigen::MatrixXd(3, 1)};
  logits[0] << 1000.0, 999.0, -5.0;
  const auto p = td::softmax(logits);
  EXPECT_NEAR(p.channels[0].sum(), 1.0, 1e-12);
  EXPECT_NEAR(p.channels[0](0, 0) / p.channels[0](1, 0), std::exp(1.0), 1e-9);
  logits[0](2, 0) = std::nan("");
  EXPECT_THROW(td::softmax(logits), td::InvalidArgument);
}

TEST(SampleCategorical, FrequenciesMatchProbabilities) {
  td::nn::RngStream rng(5);
  const int n = 100000;
  td::OneHotSequence probs;
  Eigen::MatrixXd m(3, n);
  m.colwise() = Eigen::Vector3d(0.2, 0.5, 0.3);
  probs.channels.push_back(m);
  const auto draw = td::sample_categorical(probs, rng);
  EXPECT_TRUE(draw.hard);
  const Eigen::VectorXd freq = draw.channels[0].rowwise().sum() / n;
  EXPECT_NEAR(freq(0), 0.2, 0.01);
  EXPECT_NEAR(freq(1), 0.5, 0.01);
  EXPECT_NEAR(freq(2), 0.3, 0.01);
}

TEST(ForwardNoising, MonteCarloMarginalMatchesClosedForm) {
  // Iterating categorical draws through the one-step kernel must land on the
  // closed-form marginal.
  const auto s = td::cosine_schedule(20);
  td::nn::RngStream rng(6);
  const int n = 50000;
  td::CategoryMatrix c0 = td::CategoryMatrix::Zero(1, n);
  auto c = td::one_hot_encode(c0, 3);
  const int t = 8;
  for (int k = 1; k <= t; ++k) c = td::sample_categorical(td::q_forward_step_probs(c, k, s), rng);
  const Eigen::VectorXd freq = c.channels[0].rowwise().sum() / n;
  const auto want = td::q_marginal_probs(td::one_hot_encode(td::CategoryMatrix::Zero(1, 1), 3), t, s);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(freq(j), want.channels[0](j, 0), 0.01);
}

TEST(PSampleStepDiscrete, FirstStepTakesArgmax) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(7);
  const auto ct = single(Eigen::Vector3d(0.0, 1.0, 0.0));
  td::CategoryLogits logits = {Eigen::Vector3d(4.0, 0.0, -1.0)};
  // alpha_1 is close to 1, so the posterior still favours the logits' mode
  // unless c_1 disagrees strongly; compute the argmax from the posterior.
  const auto post = td::q_posterior(ct, td::softmax(logits), 1, s);
  Eigen::Index want = 0;
  post.normalized[0].col(0).maxCoeff(&want);
  for (int rep = 0; rep < 20; ++rep) {
    const auto out = td::p_sample_step_discrete(ct, logits, 1, s, rng);
    EXPECT_EQ(td::one_hot_decode(out)(0, 0), want);
  }
}

TEST(LossDiscrete, KlMatchesBruteForce) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(8);
  for (int t = 2; t <= 10; ++t) {
    const auto c0 = random_hard_lattice({3, 2}, 4, rng);
    const auto ct = random_hard_lattice({3, 2}, 4, rng);
    const td::CategoryLogits logits = {td::test::random_matrix(3, 4, rng, -2, 2),
                                       td::test::random_matrix(2, 4, rng, -2, 2)};
    const auto sm = td::softmax(logits);
    double total = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int l = 0; l < 4; ++l) {
        const Eigen::RowVectorXd ctv = ct.channels[p].col(l).transpose();
        const auto q = brute_posterior(ctv, c0.channels[p].col(l).transpose(), t, s);
        const auto pr = brute_posterior(ctv, sm.channels[p].col(l).transpose(), t, s);
        for (Eigen::Index j = 0; j < q.size(); ++j)
          total += q(j) * (std::log(q(j) + td::kLogFloor) - std::log(pr(j) + td::kLogFloor));
      }
    }
    EXPECT_NEAR(td::loss_discrete(c0, ct, logits, t, s), total / 8.0, 1e-12) << t;
  }
}

TEST(LossDiscrete, KlVanishesWhenPredictionIsExact) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(9);
  const auto c0 = random_hard_lattice({4}, 6, rng);
  const auto ct = random_hard_lattice({4}, 6, rng);
  td::CategoryLogits logits = {(c0.channels[0].array() * 60.0).matrix()};
  EXPECT_NEAR(td::loss_discrete(c0, ct, logits, 5, s), 0.0, 1e-9);
}

TEST(LossDiscrete, FirstStepIsNegativeLogLikelihood) {
  const auto s = td::cosine_schedule(10);
  const auto c0 = single(Eigen::Vector2d(0.0, 1.0));
  const auto c1 = single(Eigen::Vector2d(0.0, 1.0));
  td::CategoryLogits logits = {Eigen::Vector2d(0.3, -0.1)};
  const auto p = td::q_posterior(c1, td::softmax(logits), 1, s).normalized[0];
  EXPECT_NEAR(td::loss_discrete(c0, c1, logits, 1, s), -std::log(p(1, 0) + td::kLogFloor), 1e-14);
}

TEST(LossDiscrete, GradientMatchesFiniteDifferences) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(10);
  for (int t : {1, 2, 7, 10}) {
    const auto c0 = random_hard_lattice({3, 2}, 3, rng);
    const auto ct = random_hard_lattice({3, 2}, 3, rng);
    td::CategoryLogits logits = {td::test::random_matrix(3, 3, rng, -2, 2), td::test::random_matrix(2, 3, rng, -2, 2)};
    const auto res = td::loss_discrete_with_grad(c0, ct, logits, t, s);
    EXPECT_NEAR(res.value, td::loss_discrete(c0, ct, logits, t, s), 0.0);
    const double h = 1e-6;
    for (std::size_t p = 0; p < logits.size(); ++p) {
      for (Eigen::Index k = 0; k < logits[p].size(); ++k) {
        const double saved = logits[p].data()[k];
        logits[p].data()[k] = saved + h;
        const double up = td::loss_discrete(c0, ct, logits, t, s);
        logits[p].data()[k] = saved - h;
        const double down = td::loss_discrete(c0, ct, logits, t, s);
        logits[p].data()[k] = saved;
        EXPECT_NEAR(res.grad_logits[p].data()[k], (up - down) / (2 * h), 1e-8) << "t=" << t;
      }
    }
  }
}

TEST(LossDiscrete, LayoutMismatchThrows) {
  const auto s = td::cosine_schedule(10);
  td::nn::RngStream rng(11);
  const auto c0 = random_hard_lattice({3}, 3, rng);
  const auto ct = random_hard_lattice({2}, 3, rng);
  td::CategoryLogits logits = {Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_THROW(td::loss_discrete(c0, ct, logits, 2, s), td::InvalidArgument);
}
