#include "timediff/nn/gru.hpp"

#include <cmath>

#include "timediff/error.hpp"
#include "timediff/nn/activations.hpp"

namespace timediff::nn {

Gru::Gru(ParamStore& params, const std::string& prefix, int input_width, int hidden_width)
    : input_(input_width), hidden_(hidden_width) {
  if (input_width < 1 || hidden_width < 1) throw InvalidArgument("Gru: widths must be positive");
  w_ih_ = params.add(prefix + "w_ih", 3 * hidden_width, input_width);
  w_hh_ = params.add(prefix + "w_hh", 3 * hidden_width, hidden_width);
  b_ih_ = params.add(prefix + "b_ih", 3 * hidden_width, 1);
  b_hn_ = params.add(prefix + "b_hn", hidden_width, 1);
}

void Gru::initialize(ParamStore& params, RngStream& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (std::size_t idx : {w_ih_, w_hh_, b_ih_, b_hn_}) {
    auto& m = params[idx];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

Eigen::MatrixXd Gru::forward(const ParamStore& params, const Eigen::MatrixXd& input, int batch, Trace* trace) const {
  if (input.rows() != input_ || batch < 1 || input.cols() % batch != 0)
    throw InvalidArgument("Gru::forward: input shape mismatch");
  const Eigen::Index h = hidden_;
  const Eigen::Index cols = input.cols();
  const int length = static_cast<int>(cols / batch);
  const auto& w_hh = params[w_hh_];
  const auto& b_hn = params[b_hn_];

  Eigen::MatrixXd ax(3 * h, cols);
  ax.noalias() = params[w_ih_] * input;
  ax.colwise() += params[b_ih_].col(0);

  Eigen::MatrixXd out(h, cols);
  Eigen::MatrixXd gates, hidden_n, hidden_prev;
  if (trace) {
    gates.resize(3 * h, cols);
    hidden_n.resize(h, cols);
    hidden_prev.resize(h, cols);
  }
  Eigen::MatrixXd hprev = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd ah(3 * h, batch);
  for (int l = 0; l < length; ++l) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(l) * batch;
    ah.noalias() = w_hh * hprev;
    const auto axl = ax.middleCols(c0, batch);
    const Eigen::ArrayXXd r = sigmoid(axl.topRows(h).array() + ah.topRows(h).array());
    const Eigen::ArrayXXd z = sigmoid(axl.middleRows(h, h).array() + ah.middleRows(h, h).array());
    const Eigen::ArrayXXd hn = ah.bottomRows(h).array().colwise() + b_hn.col(0).array();
    const Eigen::ArrayXXd n = nn::tanh(axl.bottomRows(h).array() + r * hn);
    if (trace) {
      hidden_prev.middleCols(c0, batch) = hprev;
      auto g = gates.middleCols(c0, batch);
      g.topRows(h) = r.matrix();
      g.middleRows(h, h) = z.matrix();
      g.bottomRows(h) = n.matrix();
      hidden_n.middleCols(c0, batch) = hn.matrix();
    }
    hprev = ((1.0 - z) * n + z * hprev.array()).matrix();
    out.middleCols(c0, batch) = hprev;
  }
  if (trace) {
    trace->input = input;
    trace->gates = std::move(gates);
    trace->hidden_n = std::move(hidden_n);
    trace->hidden = out;
    trace->hidden_prev = std::move(hidden_prev);
  }
  return out;
}

void Gru::backward(const ParamStore& params, const Trace& tr, const Eigen::MatrixXd& d_hidden, int batch,
                   ParamStore& grads) const {
  const Eigen::Index h = hidden_;
  const Eigen::Index cols = d_hidden.cols();
  if (d_hidden.rows() != h || tr.hidden.cols() != cols) throw ContractViolation("Gru::backward: shape mismatch");
  const int length = static_cast<int>(cols / batch);
  const auto& w_hh = params[w_hh_];

  Eigen::MatrixXd d_ax(3 * h, cols), d_ah(3 * h, cols);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, batch);
  for (int l = length - 1; l >= 0; --l) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(l) * batch;
    const auto g = tr.gates.middleCols(c0, batch).array();
    const auto r = g.topRows(h);
    const auto z = g.middleRows(h, h);
    const auto n = g.bottomRows(h);
    const auto hn = tr.hidden_n.middleCols(c0, batch).array();
    const auto hp = tr.hidden_prev.middleCols(c0, batch).array();

    const Eigen::ArrayXXd dh = d_hidden.middleCols(c0, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dn_pre = dh * (1.0 - z) * (1.0 - n.square());
    const Eigen::ArrayXXd dz_pre = dh * (hp - n) * z * (1.0 - z);
    const Eigen::ArrayXXd dr_pre = dn_pre * hn * r * (1.0 - r);
    auto ax = d_ax.middleCols(c0, batch);
    ax.topRows(h) = dr_pre.matrix();
    ax.middleRows(h, h) = dz_pre.matrix();
    ax.bottomRows(h) = dn_pre.matrix();
    auto ahc = d_ah.middleCols(c0, batch);
    ahc.topRows(h) = dr_pre.matrix();
    ahc.middleRows(h, h) = dz_pre.matrix();
    ahc.bottomRows(h) = (dn_pre * r).matrix();
    dh_next = (dh * z).matrix();
    dh_next.noalias() += w_hh.transpose() * ahc;
  }
  grads[w_ih_].noalias() += d_ax * tr.input.transpose();
  grads[w_hh_].noalias() += d_ah * tr.hidden_prev.transpose();
  grads[b_ih_].col(0) += d_ax.rowwise().sum();
  grads[b_hn_].col(0) += d_ah.bottomRows(h).rowwise().sum();
}

}  // namespace timediff::nn
