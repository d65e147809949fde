#pragma once

#include <string>

#include <Eigen/Dense>

#include "timediff/nn/param_store.hpp"
#include "timediff/nn/rng.hpp"

namespace timediff::nn {

/// Single-layer GRU over time-major batches (column l * B + b is step l of
/// sample b), PyTorch gate convention:
///   r = s(W_ir x + b_ir + W_hr h), z = s(W_iz x + b_iz + W_hz h),
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn)), h' = (1 - z) n + z h.
class Gru {
 public:
  /// Registers `<prefix>w_ih`, `w_hh`, `b_ih`, `b_hn` in `params`.
  Gru(ParamStore& params, const std::string& prefix, int input_width, int hidden_width);

  void initialize(ParamStore& params, RngStream& rng) const;

  struct Trace {
    Eigen::MatrixXd input, gates, hidden_n, hidden, hidden_prev;
  };

  /// Returns all hidden states (h x L*B).
  Eigen::MatrixXd forward(const ParamStore& params, const Eigen::MatrixXd& input, int batch,
                          Trace* trace = nullptr) const;

  /// Accumulates parameter gradients into `grads` given d loss / d hidden.
  void backward(const ParamStore& params, const Trace& trace, const Eigen::MatrixXd& d_hidden, int batch,
                ParamStore& grads) const;

  int hidden_width() const { return hidden_; }

 private:
  int input_, hidden_;
  std::size_t w_ih_, w_hh_, b_ih_, b_hn_;
};

}  // namespace timediff::nn
