#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "timediff/gaussian.hpp"
#include "timediff/multinomial.hpp"
#include "timediff/nn/param_store.hpp"
#include "timediff/nn/rng.hpp"

namespace timediff {

/// Channel layout and widths of the time-conditional BRNN denoiser.
struct DenoiserShape {
  int numeric_channels = 0;    // P_r
  std::vector<int> categories; // K_p for every discrete channel
  int hidden = 0;              // H, both directions concatenated; must be even
  int embed_width = 128;       // E, sinusoidal width; must be even
  int layers = 2;

  int input_width() const;
  int output_width() const { return input_width(); }
  int direction_width() const { return hidden / 2; }
  int mlp_width() const { return 4 * embed_width; }

  /// H = hidden_multiple * (P_r + sum K_p), rounded up to an even number.
  static DenoiserShape with_defaults(int numeric_channels, std::vector<int> categories, int embed_width = 128,
                                     int hidden_multiple = 4, int layers = 2);

  /// Throws InvalidArgument when a width is non-positive or odd where it must be even.
  void validate() const;
  bool operator==(const DenoiserShape&) const = default;
};

/// Sinusoidal step embedding: entry i < E/2 is sin(t / 10000^(2i/E)), entry
/// E/2 + i is the matching cosine.
Eigen::VectorXd sinusoidal_embed(int t, int width);

struct DenoiserOutput {
  NumericMatrix eps_pred;  // P_r x L
  CategoryLogits logits;   // per channel K_p x L
};

struct LstmTrace {
  Eigen::MatrixXd input;   // in x (L*B)
  Eigen::MatrixXd gates;   // 4h x (L*B), activated i, f, g, o
  Eigen::MatrixXd cell;    // h x (L*B)
  Eigen::MatrixXd tanh_cell;
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd hidden_prev;  // h_{l-1} in processing order, zero at the first step
  Eigen::MatrixXd cell_prev;
};

/// Everything `Denoiser::backward` needs from a forward pass.
struct DenoiserTrace {
  std::uint64_t id = 0;
  int batch = 0;
  int length = 0;
  std::vector<int> steps;
  Eigen::MatrixXd embed_raw, embed_pre1, embed_act1, embed_pre2, embed_act2, embed_out;
  std::vector<LstmTrace> rnn;  // layer-major, forward direction first
  Eigen::MatrixXd rnn_out;     // H x (L*B)
  Eigen::MatrixXd norm_hat;    // normalised before gain/bias
  Eigen::VectorXd norm_inv_std;  // per column
  Eigen::MatrixXd norm_out;    // after gain/bias
  Eigen::MatrixXd cond_out;    // after scale/shift
};

/// Time-conditional bidirectional LSTM mapping noisy numerical values plus
/// noisy one-hot lattices to epsilon predictions and category logits.
///
/// Batched tensors are time-major: column l * B + b holds step l of sample b.
/// Rows of the input are the numerical channels followed by each discrete
/// channel's K_p one-hot entries; the output uses the same row layout.
class Denoiser {
 public:
  explicit Denoiser(DenoiserShape shape);

  const DenoiserShape& shape() const { return shape_; }

  /// Parameter store with every tensor registered and zeroed.
  nn::ParamStore make_params() const;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
  /// layernorm gain.
  void initialize(nn::ParamStore& params, nn::RngStream& rng) const;

  /// Batched forward pass. `steps` holds one diffusion step per sample. When
  /// `trace` is non-null it receives the activations needed for backward.
  Eigen::MatrixXd forward(const nn::ParamStore& params, const Eigen::MatrixXd& input, std::span<const int> steps,
                          DenoiserTrace* trace = nullptr) const;

  /// Exact parameter gradients of sum(grad_output .* output) for the forward
  /// pass recorded in `trace`.
  nn::ParamStore backward(const nn::ParamStore& params, const DenoiserTrace& trace,
                          const Eigen::MatrixXd& grad_output) const;

  /// Single-sample convenience wrapper.
  DenoiserOutput forward(const nn::ParamStore& params, const NumericMatrix& x_t, const OneHotSequence& c_t,
                         int t) const;

  /// Packs samples into the time-major batch layout.
  Eigen::MatrixXd pack(std::span<const NumericMatrix> x, std::span<const OneHotSequence> c) const;
  /// Extracts sample `b` from a batched output (or output gradient).
  DenoiserOutput unpack(const Eigen::MatrixXd& output, int batch, int b) const;
  /// Writes per-sample output gradients into batch column layout.
  void scatter(Eigen::MatrixXd& batched, int batch, int b, const NumericMatrix& d_eps,
               const CategoryLogits& d_logits) const;

  /// Named groups of parameter coordinates used by gradient checks: the
  /// embedding MLP, every LSTM gate block per layer and direction, the
  /// layernorm, and the output layer.
  struct ParamGroup {
    std::string name;
    // (tensor index, row begin, row count); all columns of those rows.
    struct Slice {
      std::size_t tensor;
      Eigen::Index row_begin;
      Eigen::Index rows;
    };
    std::vector<Slice> slices;
  };
  std::vector<ParamGroup> param_groups(const nn::ParamStore& params) const;

 private:
  struct LstmIndex {
    std::size_t w_ih, w_hh, bias;
  };

  DenoiserShape shape_;
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0, fc3_w_ = 0, fc3_b_ = 0;
  std::vector<LstmIndex> lstm_;  // layer-major, forward direction first
  std::size_t norm_gain_ = 0, norm_bias_ = 0, out_w_ = 0, out_b_ = 0;
  nn::ParamStore layout_;
};

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace timediff
