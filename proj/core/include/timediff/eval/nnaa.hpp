#pragma once

#include <Eigen/Dense>

namespace timediff::eval {

/// Euclidean distance from every column of `a` to its nearest column of `b`.
/// With `exclude_self`, `a` and `b` are the same set and j = i is skipped.
Eigen::VectorXd nn_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool exclude_self);

struct NNAAReport {
  double aa_test = 0.0;
  double aa_train = 0.0;
  double nnaa = 0.0;  // |aa_test - aa_train|
  // Index convention: first letter is the query set, second the reference.
  // T = real train, E = real test, S = synthetic.
  Eigen::VectorXd d_ts, d_st, d_es, d_se, d_tt, d_ss, d_ee;
};

/// Nearest-neighbour adversarial accuracy on equally sized, already
/// standardised point sets (one column per point).
///   AA_test  = (mean[d_ES > d_EE] + mean[d_SE > d_SS]) / 2
///   AA_train = (mean[d_TS > d_TT] + mean[d_ST > d_SS]) / 2
NNAAReport nnaa(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const Eigen::MatrixXd& synth);

}  // namespace timediff::eval
