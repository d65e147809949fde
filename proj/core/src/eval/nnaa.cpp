#include "timediff/eval/nnaa.hpp"

#include <cmath>
#include <limits>

#include "timediff/error.hpp"

namespace timediff::eval {

Eigen::VectorXd nn_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool exclude_self) {
  if (a.rows() != b.rows()) throw InvalidArgument("nn_distances: dimension mismatch");
  if (exclude_self && (a.cols() != b.cols() || a.cols() < 2))
    throw InvalidArgument("nn_distances: self-exclusion needs one set with at least 2 points");
  if (!exclude_self && b.cols() < 1) throw InvalidArgument("nn_distances: empty reference set");
  Eigen::VectorXd out(a.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    const auto ai = a.col(i);
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (exclude_self && j == i) continue;
      const double d2 = (ai - b.col(j)).squaredNorm();
      if (d2 < best) best = d2;
    }
    out(i) = std::sqrt(best);
  }
  return out;
}

namespace {

double fraction_greater(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return static_cast<double>((x.array() > y.array()).count()) / static_cast<double>(x.size());
}

}  // namespace

NNAAReport nnaa(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const Eigen::MatrixXd& synth) {
  if (train.cols() != test.cols() || train.cols() != synth.cols())
    throw InvalidArgument("nnaa: the three sets must have the same size (subsample first)");
  if (train.rows() != test.rows() || train.rows() != synth.rows())
    throw InvalidArgument("nnaa: dimension mismatch between sets");
  NNAAReport r;
  r.d_ts = nn_distances(train, synth, false);
  r.d_st = nn_distances(synth, train, false);
  r.d_es = nn_distances(test, synth, false);
  r.d_se = nn_distances(synth, test, false);
  r.d_tt = nn_distances(train, train, true);
  r.d_ss = nn_distances(synth, synth, true);
  r.d_ee = nn_distances(test, test, true);
  r.aa_test = 0.5 * (fraction_greater(r.d_es, r.d_ee) + fraction_greater(r.d_se, r.d_ss));
  r.aa_train = 0.5 * (fraction_greater(r.d_ts, r.d_tt) + fraction_greater(r.d_st, r.d_ss));
  r.nnaa = std::abs(r.aa_test - r.aa_train);
  return r;
}

}  // namespace timediff::eval
