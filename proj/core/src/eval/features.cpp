#include "timediff/eval/features.hpp"

#include <cmath>
#include <numeric>

#include "timediff/error.hpp"

namespace timediff::eval {

namespace {

Eigen::VectorXd safe_inverse_sd(const Eigen::VectorXd& var) {
  Eigen::VectorXd inv(var.size());
  for (Eigen::Index i = 0; i < var.size(); ++i) inv(i) = var(i) > 1e-24 ? 1.0 / std::sqrt(var(i)) : 1.0;
  return inv;
}

}  // namespace

FeatureEncoder::FeatureEncoder(const data::Corpus& real_train) {
  if (real_train.empty()) throw InvalidArgument("FeatureEncoder: reference corpus is empty");
  layout_.numeric_channels = real_train.numeric_channels;
  layout_.length = real_train.length;
  layout_.categories = real_train.categories;
  stats_ = data::compute_stats(real_train);
  length_ = real_train.length;
  width_ = 2 * real_train.numeric_channels + std::accumulate(real_train.categories.begin(),
                                                             real_train.categories.end(), 0);

  const auto raw = raw_sequences(real_train);
  const double n_steps = static_cast<double>(raw.size()) * length_;
  step_mean_ = Eigen::VectorXd::Zero(width_);
  for (const auto& s : raw) step_mean_ += s.rowwise().sum();
  step_mean_ /= n_steps;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(width_);
  for (const auto& s : raw) var += (s.colwise() - step_mean_).array().square().matrix().rowwise().sum();
  var /= n_steps;
  step_inv_sd_ = safe_inverse_sd(var);

  const Eigen::Index flat = static_cast<Eigen::Index>(width_) * length_;
  flat_mean_ = Eigen::VectorXd::Zero(flat);
  for (const auto& s : raw) flat_mean_ += s.reshaped();
  flat_mean_ /= static_cast<double>(raw.size());
  Eigen::VectorXd fvar = Eigen::VectorXd::Zero(flat);
  for (const auto& s : raw) fvar += (s.reshaped() - flat_mean_).array().square().matrix();
  fvar /= static_cast<double>(raw.size());
  flat_inv_sd_ = safe_inverse_sd(fvar);
}

void FeatureEncoder::require_layout(const data::Corpus& corpus) const {
  if (!corpus.same_layout(layout_)) throw InvalidArgument("FeatureEncoder: corpus layout differs from reference");
}

std::vector<Eigen::MatrixXd> FeatureEncoder::raw_sequences(const data::Corpus& corpus) const {
  require_layout(corpus);
  const int p_r = corpus.numeric_channels;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.samples) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(width_, length_);
    if (p_r > 0) {
      f.topRows(p_r) = data::impute_and_scale(s.values, s.mask, stats_);
      f.middleRows(p_r, p_r) = s.mask.cast<double>();
    }
    Eigen::Index row = 2 * p_r;
    for (int p = 0; p < corpus.categorical_channels(); ++p) {
      for (int l = 0; l < length_; ++l) f(row + s.categories(p, l), l) = 1.0;
      row += corpus.categories[static_cast<std::size_t>(p)];
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Eigen::MatrixXd> FeatureEncoder::sequences(const data::Corpus& corpus) const {
  auto seqs = raw_sequences(corpus);
  for (auto& s : seqs) s = ((s.colwise() - step_mean_).array().colwise() * step_inv_sd_.array()).matrix();
  return seqs;
}

Eigen::MatrixXd FeatureEncoder::flattened(const data::Corpus& corpus) const {
  const auto seqs = raw_sequences(corpus);
  Eigen::MatrixXd out(flat_mean_.size(), static_cast<Eigen::Index>(seqs.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) =
        ((seqs[i].reshaped() - flat_mean_).array() * flat_inv_sd_.array()).matrix();
  }
  return out;
}

Eigen::MatrixXd pack_time_major(const std::vector<const Eigen::MatrixXd*>& seqs, int first, int count) {
  const auto batch = static_cast<Eigen::Index>(seqs.size());
  if (batch == 0) throw InvalidArgument("pack_time_major: empty batch");
  const Eigen::Index rows = seqs.front()->rows();
  Eigen::MatrixXd out(rows, batch * count);
  for (int l = 0; l < count; ++l) {
    for (Eigen::Index b = 0; b < batch; ++b) out.col(l * batch + b) = seqs[static_cast<std::size_t>(b)]->col(first + l);
  }
  return out;
}

}  // namespace timediff::eval
