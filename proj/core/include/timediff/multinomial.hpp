#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "timediff/nn/rng.hpp"
#include "timediff/schedule.hpp"

namespace timediff {

/// Integer categories of the discrete channels, rows = channels, cols = steps.
using CategoryMatrix = Eigen::MatrixXi;

/// One-hot lattice over the discrete channels. Channel p is stored as a
/// K_p x L matrix whose columns lie on the probability simplex. `hard` marks
/// lattices whose columns are exact basis vectors.
struct OneHotSequence {
  std::vector<Eigen::MatrixXd> channels;
  bool hard = false;

  int num_channels() const { return static_cast<int>(channels.size()); }
  int length() const { return channels.empty() ? 0 : static_cast<int>(channels.front().cols()); }
  std::vector<int> categories() const;
};

/// Unnormalised denoiser outputs for the discrete channels, same layout as
/// OneHotSequence::channels.
using CategoryLogits = std::vector<Eigen::MatrixXd>;

struct CategoricalPosterior {
  std::vector<Eigen::MatrixXd> phi;
  std::vector<Eigen::MatrixXd> normalized;
};

OneHotSequence one_hot_encode(const CategoryMatrix& c, std::span<const int> num_categories);
OneHotSequence one_hot_encode(const CategoryMatrix& c, int num_categories);

/// Argmax per slice (lowest index wins ties).
CategoryMatrix one_hot_decode(const OneHotSequence& seq);

/// Returns a description of every slice that leaves the simplex by more
/// than `tol`, or breaks the hard one-hot contract when the flag is set.
std::vector<std::string> check_lattice(const OneHotSequence& seq, double tol = 1e-9);

/// (1 - beta_t) * c_prev + beta_t / K.
OneHotSequence q_forward_step_probs(const OneHotSequence& c_prev, int t, const DiffusionSchedule& schedule);

/// abar_t * c0 + (1 - abar_t) / K. t = 0 returns c0 (abar_0 = 1).
OneHotSequence q_marginal_probs(const OneHotSequence& c0, int t, const DiffusionSchedule& schedule);

/// phi = (alpha_t c_t + (1 - alpha_t)/K) .* (abar_{t-1} c0 + (1 - abar_{t-1})/K),
/// plus its per-slice normalisation.
CategoricalPosterior q_posterior(const OneHotSequence& c_t, const OneHotSequence& c0_est, int t,
                                 const DiffusionSchedule& schedule);

/// Column-wise softmax of every channel. Throws InvalidArgument on
/// non-finite logits.
OneHotSequence softmax(const CategoryLogits& logits);

/// Draws one category per slice of a probability lattice.
OneHotSequence sample_categorical(const OneHotSequence& probs, nn::RngStream& rng);

/// Reverse step: softmax(logits) stands in for c0 inside q_posterior. A
/// category is drawn from the posterior for t >= 2; t = 1 takes the argmax.
OneHotSequence p_sample_step_discrete(const OneHotSequence& c_t, const CategoryLogits& logits, int t,
                                      const DiffusionSchedule& schedule, nn::RngStream& rng);

struct DiscreteLoss {
  double value = 0.0;
  CategoryLogits grad_logits;
};

/// Mean over (channel, position) slices of KL(q(c_{t-1} | c_t, c0) || p_theta)
/// for t >= 2, and of -log p_theta(c0 | c_1) for t = 1. Logarithms carry an
/// additive 1e-12 floor.
double loss_discrete(const OneHotSequence& c0, const OneHotSequence& c_t, const CategoryLogits& logits, int t,
                     const DiffusionSchedule& schedule);

/// loss_discrete together with its exact gradient with respect to the logits.
DiscreteLoss loss_discrete_with_grad(const OneHotSequence& c0, const OneHotSequence& c_t,
                                     const CategoryLogits& logits, int t, const DiffusionSchedule& schedule);

inline constexpr double kLogFloor = 1e-12;

}  // namespace timediff
