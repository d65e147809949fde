#include "timediff/denoiser.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "timediff/error.hpp"
#include "timediff/nn/activations.hpp"

namespace timediff {

int DenoiserShape::input_width() const {
  return numeric_channels + std::accumulate(categories.begin(), categories.end(), 0);
}

DenoiserShape DenoiserShape::with_defaults(int numeric_channels, std::vector<int> categories, int embed_width,
                                           int hidden_multiple, int layers) {
  DenoiserShape s;
  s.numeric_channels = numeric_channels;
  s.categories = std::move(categories);
  s.embed_width = embed_width;
  s.layers = layers;
  s.hidden = hidden_multiple * s.input_width();
  s.hidden += s.hidden % 2;
  s.validate();
  return s;
}

void DenoiserShape::validate() const {
  if (numeric_channels < 0) throw InvalidArgument("numeric channel count must be >= 0");
  for (int k : categories) {
    if (k < 2) throw InvalidArgument("every discrete channel needs at least 2 categories");
  }
  if (input_width() < 1) throw InvalidArgument("denoiser needs at least one input feature");
  if (hidden < 2 || hidden % 2 != 0) throw InvalidArgument("hidden width must be even and >= 2");
  if (embed_width < 2 || embed_width % 2 != 0) throw InvalidArgument("embedding width must be even and >= 2");
  if (layers < 1) throw InvalidArgument("BRNN needs at least one layer");
}

Eigen::VectorXd sinusoidal_embed(int t, int width) {
  if (width <= 0 || width % 2 != 0) throw InvalidArgument("sinusoidal_embed: width must be positive and even");
  if (t < 0) throw InvalidArgument("sinusoidal_embed: step must be >= 0");
  const int half = width / 2;
  Eigen::VectorXd e(width);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(width));
    e(i) = std::sin(t * freq);
    e(half + i) = std::cos(t * freq);
  }
  return e;
}

namespace {

std::atomic<std::uint64_t> g_trace_counter{0};

// Uniform(-bound, bound) fill.
void fill_uniform(Eigen::MatrixXd& m, double bound, nn::RngStream& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

struct LstmWeights {
  const Eigen::MatrixXd& w_ih;
  const Eigen::MatrixXd& w_hh;
  const Eigen::MatrixXd& bias;
};

// Runs one direction of one LSTM layer over the whole batch. `out` receives
// the hidden states (h x L*B). When `trace` is non-null it is filled.
void lstm_forward(const LstmWeights& w, const Eigen::MatrixXd& input, int batch, int length, bool reverse,
                  Eigen::Ref<Eigen::MatrixXd> out, LstmTrace* trace) {
  const Eigen::Index h = w.w_hh.cols();
  const Eigen::Index cols = input.cols();
  Eigen::MatrixXd z(4 * h, cols);
  z.noalias() = w.w_ih * input;
  z.colwise() += w.bias.col(0);

  Eigen::MatrixXd gates, cell(h, cols), tanh_cell, hidden_prev, cell_prev;
  if (trace) {
    gates.resize(4 * h, cols);
    tanh_cell.resize(h, cols);
    hidden_prev.setZero(h, cols);
    cell_prev.setZero(h, cols);
  }

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd hprev = Eigen::MatrixXd::Zero(h, batch);
  Eigen::ArrayXXd gi, gf, gg, go, tc;
  for (int s = 0; s < length; ++s) {
    const int l = reverse ? length - 1 - s : s;
    auto zc = z.middleCols(static_cast<Eigen::Index>(l) * batch, batch);
    if (s > 0) zc.noalias() += w.w_hh * hprev;
    gi = nn::sigmoid(zc.topRows(h).array());
    gf = nn::sigmoid(zc.middleRows(h, h).array());
    gg = nn::tanh(zc.middleRows(2 * h, h).array());
    go = nn::sigmoid(zc.bottomRows(h).array());
    if (trace) {
      hidden_prev.middleCols(static_cast<Eigen::Index>(l) * batch, batch) = hprev;
      cell_prev.middleCols(static_cast<Eigen::Index>(l) * batch, batch) = c;
    }
    c = (gf * c.array() + gi * gg).matrix();
    tc = nn::tanh(c.array());
    hprev = (go * tc).matrix();
    out.middleCols(static_cast<Eigen::Index>(l) * batch, batch) = hprev;
    if (trace) {
      auto gcol = gates.middleCols(static_cast<Eigen::Index>(l) * batch, batch);
      gcol.topRows(h) = gi.matrix();
      gcol.middleRows(h, h) = gf.matrix();
      gcol.middleRows(2 * h, h) = gg.matrix();
      gcol.bottomRows(h) = go.matrix();
      cell.middleCols(static_cast<Eigen::Index>(l) * batch, batch) = c;
      tanh_cell.middleCols(static_cast<Eigen::Index>(l) * batch, batch) = tc.matrix();
    }
  }
  if (trace) {
    trace->input = input;
    trace->gates = std::move(gates);
    trace->cell = std::move(cell);
    trace->tanh_cell = std::move(tanh_cell);
    trace->hidden = out;
    trace->hidden_prev = std::move(hidden_prev);
    trace->cell_prev = std::move(cell_prev);
  }
}

// Backward of lstm_forward. Accumulates weight gradients and returns the
// gradient with respect to the layer input (when want_input_grad).
Eigen::MatrixXd lstm_backward(const LstmWeights& w, const LstmTrace& tr, const Eigen::MatrixXd& d_hidden,
                              int batch, int length, bool reverse, Eigen::MatrixXd& g_w_ih, Eigen::MatrixXd& g_w_hh,
                              Eigen::MatrixXd& g_bias, bool want_input_grad) {
  const Eigen::Index h = w.w_hh.cols();
  Eigen::MatrixXd dz(4 * h, d_hidden.cols());
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h, batch);
  Eigen::ArrayXXd dh, dc;
  for (int s = length - 1; s >= 0; --s) {
    const int l = reverse ? length - 1 - s : s;
    const Eigen::Index c0 = static_cast<Eigen::Index>(l) * batch;
    const auto g = tr.gates.middleCols(c0, batch).array();
    const auto gi = g.topRows(h);
    const auto gf = g.middleRows(h, h);
    const auto gg = g.middleRows(2 * h, h);
    const auto go = g.bottomRows(h);
    const auto tc = tr.tanh_cell.middleCols(c0, batch).array();
    const auto cp = tr.cell_prev.middleCols(c0, batch).array();

    dh = d_hidden.middleCols(c0, batch).array() + dh_next.array();
    dc = dc_next.array() + dh * go * (1.0 - tc.square());
    auto dzc = dz.middleCols(c0, batch);
    dzc.topRows(h) = (dc * gg * gi * (1.0 - gi)).matrix();
    dzc.middleRows(h, h) = (dc * cp * gf * (1.0 - gf)).matrix();
    dzc.middleRows(2 * h, h) = (dc * gi * (1.0 - gg.square())).matrix();
    dzc.bottomRows(h) = (dh * tc * go * (1.0 - go)).matrix();
    dc_next = (dc * gf).matrix();
    if (s > 0) {
      dh_next.noalias() = w.w_hh.transpose() * dzc;
    }
  }
  g_w_ih.noalias() += dz * tr.input.transpose();
  g_w_hh.noalias() += dz * tr.hidden_prev.transpose();
  g_bias.col(0) += dz.rowwise().sum();
  if (!want_input_grad) return {};
  Eigen::MatrixXd d_input(w.w_ih.cols(), dz.cols());
  d_input.noalias() = w.w_ih.transpose() * dz;
  return d_input;
}

}  // namespace

Denoiser::Denoiser(DenoiserShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  const int e = shape_.embed_width;
  const int m = shape_.mlp_width();
  const int hid = shape_.hidden;
  const int h = shape_.direction_width();
  fc1_w_ = layout_.add("embed.fc1.weight", m, e);
  fc1_b_ = layout_.add("embed.fc1.bias", m, 1);
  fc2_w_ = layout_.add("embed.fc2.weight", m, m);
  fc2_b_ = layout_.add("embed.fc2.bias", m, 1);
  fc3_w_ = layout_.add("embed.fc3.weight", 2 * hid, m);
  fc3_b_ = layout_.add("embed.fc3.bias", 2 * hid, 1);
  for (int layer = 0; layer < shape_.layers; ++layer) {
    const int in = layer == 0 ? shape_.input_width() : hid;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = "rnn.l" + std::to_string(layer) + "." + dir + ".";
      LstmIndex idx;
      idx.w_ih = layout_.add(p + "w_ih", 4 * h, in);
      idx.w_hh = layout_.add(p + "w_hh", 4 * h, h);
      idx.bias = layout_.add(p + "bias", 4 * h, 1);
      lstm_.push_back(idx);
    }
  }
  norm_gain_ = layout_.add("norm.gain", hid, 1);
  norm_bias_ = layout_.add("norm.bias", hid, 1);
  out_w_ = layout_.add("out.weight", shape_.output_width(), hid);
  out_b_ = layout_.add("out.bias", shape_.output_width(), 1);
}

nn::ParamStore Denoiser::make_params() const { return layout_.zeros_like(); }

void Denoiser::initialize(nn::ParamStore& params, nn::RngStream& rng) const {
  nn::require_same_layout(params, layout_, "Denoiser::initialize");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    if (i == norm_gain_) {
      t.setOnes();
    } else if (t.cols() == 1) {
      t.setZero();
    } else {
      fill_uniform(t, 1.0 / std::sqrt(static_cast<double>(t.cols())), rng);
    }
  }
}

Eigen::MatrixXd Denoiser::forward(const nn::ParamStore& params, const Eigen::MatrixXd& input,
                                  std::span<const int> steps, DenoiserTrace* trace) const {
  nn::require_same_layout(params, layout_, "Denoiser::forward");
  const int batch = static_cast<int>(steps.size());
  if (batch == 0) throw InvalidArgument("Denoiser::forward: empty batch");
  if (input.rows() != shape_.input_width()) {
    throw InvalidArgument("Denoiser::forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                          std::to_string(shape_.input_width()));
  }
  if (input.cols() % batch != 0 || input.cols() == 0) {
    throw InvalidArgument("Denoiser::forward: column count is not a multiple of the batch size");
  }
  const int length = static_cast<int>(input.cols() / batch);
  const int hid = shape_.hidden;
  const int h = shape_.direction_width();
  const Eigen::Index cols = input.cols();

  // Step embedding. Without a trace, a batch sharing one step is embedded once.
  const bool shared_step =
      trace == nullptr && std::all_of(steps.begin(), steps.end(), [&](int s) { return s == steps[0]; });
  const int emb_cols = shared_step ? 1 : batch;
  Eigen::MatrixXd raw(shape_.embed_width, emb_cols);
  for (int b = 0; b < emb_cols; ++b) raw.col(b) = sinusoidal_embed(steps[static_cast<std::size_t>(b)], shape_.embed_width);
  Eigen::MatrixXd pre1 = params[fc1_w_] * raw;
  pre1.colwise() += params[fc1_b_].col(0);
  Eigen::MatrixXd act1 = nn::gelu(pre1.array()).matrix();
  Eigen::MatrixXd pre2 = params[fc2_w_] * act1;
  pre2.colwise() += params[fc2_b_].col(0);
  Eigen::MatrixXd act2 = nn::silu(pre2.array()).matrix();
  Eigen::MatrixXd embed = params[fc3_w_] * act2;
  embed.colwise() += params[fc3_b_].col(0);

  // Stacked bidirectional LSTM.
  if (trace) trace->rnn.assign(lstm_.size(), {});
  Eigen::MatrixXd layer_in = input;
  Eigen::MatrixXd layer_out(hid, cols);
  for (int layer = 0; layer < shape_.layers; ++layer) {
    for (int dir = 0; dir < 2; ++dir) {
      const std::size_t k = static_cast<std::size_t>(2 * layer + dir);
      const LstmIndex& idx = lstm_[k];
      LstmWeights w{params[idx.w_ih], params[idx.w_hh], params[idx.bias]};
      lstm_forward(w, layer_in, batch, length, dir == 1, layer_out.middleRows(dir * h, h),
                   trace ? &trace->rnn[k] : nullptr);
    }
    layer_in = layer_out;
  }

  // Per-step layernorm over the concatenated hidden state.
  Eigen::MatrixXd hat(hid, cols);
  Eigen::VectorXd inv_std(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto col = layer_out.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    inv_std(j) = 1.0 / std::sqrt(var + kLayerNormEps);
    hat.col(j) = (col.array() - mean) * inv_std(j);
  }
  Eigen::MatrixXd normed = (hat.array().colwise() * params[norm_gain_].col(0).array()).matrix();
  normed.colwise() += params[norm_bias_].col(0);

  // Scale/shift conditioning: h * (scale + 1) + shift.
  Eigen::MatrixXd cond(hid, cols);
  for (int l = 0; l < length; ++l) {
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index j = static_cast<Eigen::Index>(l) * batch + b;
      const Eigen::Index e = shared_step ? 0 : b;
      cond.col(j) = (normed.col(j).array() * (embed.col(e).head(hid).array() + 1.0) +
                     embed.col(e).tail(hid).array())
                        .matrix();
    }
  }

  Eigen::MatrixXd out(shape_.output_width(), cols);
  out.noalias() = params[out_w_] * cond;
  out.colwise() += params[out_b_].col(0);

  if (trace) {
    trace->id = ++g_trace_counter;
    trace->batch = batch;
    trace->length = length;
    trace->steps.assign(steps.begin(), steps.end());
    trace->embed_raw = std::move(raw);
    trace->embed_pre1 = std::move(pre1);
    trace->embed_act1 = std::move(act1);
    trace->embed_pre2 = std::move(pre2);
    trace->embed_act2 = std::move(act2);
    trace->embed_out = std::move(embed);
    trace->rnn_out = std::move(layer_out);
    trace->norm_hat = std::move(hat);
    trace->norm_inv_std = std::move(inv_std);
    trace->norm_out = std::move(normed);
    trace->cond_out = std::move(cond);
  }
  return out;
}

nn::ParamStore Denoiser::backward(const nn::ParamStore& params, const DenoiserTrace& trace,
                                  const Eigen::MatrixXd& grad_output) const {
  nn::require_same_layout(params, layout_, "Denoiser::backward");
  const int batch = trace.batch;
  const int length = trace.length;
  const Eigen::Index cols = static_cast<Eigen::Index>(batch) * length;
  if (trace.id == 0 || trace.rnn.size() != lstm_.size() || trace.cond_out.cols() != cols) {
    throw ContractViolation("Denoiser::backward: trace was not produced by a forward pass of this model");
  }
  if (grad_output.rows() != shape_.output_width() || grad_output.cols() != cols) {
    throw ContractViolation("Denoiser::backward: output gradient shape does not match the traced forward pass");
  }
  const int hid = shape_.hidden;
  const int h = shape_.direction_width();

  nn::ParamStore g = layout_.zeros_like();

  // Output layer.
  g[out_w_].noalias() = grad_output * trace.cond_out.transpose();
  g[out_b_].col(0) = grad_output.rowwise().sum();
  Eigen::MatrixXd d_cond(hid, cols);
  d_cond.noalias() = params[out_w_].transpose() * grad_output;

  // Conditioning.
  Eigen::MatrixXd d_embed = Eigen::MatrixXd::Zero(2 * hid, batch);
  Eigen::MatrixXd d_normed(hid, cols);
  for (int l = 0; l < length; ++l) {
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index j = static_cast<Eigen::Index>(l) * batch + b;
      const auto dc = d_cond.col(j).array();
      d_embed.col(b).head(hid).array() += dc * trace.norm_out.col(j).array();
      d_embed.col(b).tail(hid).array() += dc;
      d_normed.col(j) = (dc * (trace.embed_out.col(b).head(hid).array() + 1.0)).matrix();
    }
  }

  // Layernorm.
  g[norm_gain_].col(0) = (d_normed.array() * trace.norm_hat.array()).rowwise().sum().matrix();
  g[norm_bias_].col(0) = d_normed.rowwise().sum();
  Eigen::MatrixXd d_rnn(hid, cols);
  {
    const Eigen::ArrayXXd d_hat = d_normed.array().colwise() * params[norm_gain_].col(0).array();
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto dh = d_hat.col(j);
      const auto xh = trace.norm_hat.col(j).array();
      const double m1 = dh.mean();
      const double m2 = (dh * xh).mean();
      d_rnn.col(j) = (trace.norm_inv_std(j) * (dh - m1 - xh * m2)).matrix();
    }
  }

  // Stacked BRNN, top layer first.
  for (int layer = shape_.layers - 1; layer >= 0; --layer) {
    Eigen::MatrixXd d_in;
    for (int dir = 0; dir < 2; ++dir) {
      const std::size_t k = static_cast<std::size_t>(2 * layer + dir);
      const LstmIndex& idx = lstm_[k];
      LstmWeights w{params[idx.w_ih], params[idx.w_hh], params[idx.bias]};
      Eigen::MatrixXd d_hidden = d_rnn.middleRows(dir * h, h);
      Eigen::MatrixXd di = lstm_backward(w, trace.rnn[k], d_hidden, batch, length, dir == 1, g[idx.w_ih],
                                         g[idx.w_hh], g[idx.bias], layer > 0);
      if (layer > 0) {
        if (d_in.size() == 0) {
          d_in = std::move(di);
        } else {
          d_in += di;
        }
      }
    }
    if (layer > 0) d_rnn = std::move(d_in);
  }

  // Embedding MLP.
  g[fc3_w_].noalias() = d_embed * trace.embed_act2.transpose();
  g[fc3_b_].col(0) = d_embed.rowwise().sum();
  Eigen::MatrixXd d_act2 = params[fc3_w_].transpose() * d_embed;
  Eigen::MatrixXd d_pre2 = (d_act2.array() * nn::silu_grad(trace.embed_pre2.array())).matrix();
  g[fc2_w_].noalias() = d_pre2 * trace.embed_act1.transpose();
  g[fc2_b_].col(0) = d_pre2.rowwise().sum();
  Eigen::MatrixXd d_act1 = params[fc2_w_].transpose() * d_pre2;
  Eigen::MatrixXd d_pre1 = (d_act1.array() * nn::gelu_grad(trace.embed_pre1.array())).matrix();
  g[fc1_w_].noalias() = d_pre1 * trace.embed_raw.transpose();
  g[fc1_b_].col(0) = d_pre1.rowwise().sum();
  return g;
}

Eigen::MatrixXd Denoiser::pack(std::span<const NumericMatrix> x, std::span<const OneHotSequence> c) const {
  const std::size_t batch = x.size();
  if (batch == 0 || c.size() != batch) throw InvalidArgument("Denoiser::pack: need one lattice per numeric sample");
  const Eigen::Index length = x[0].cols();
  Eigen::MatrixXd out(shape_.input_width(), length * static_cast<Eigen::Index>(batch));
  for (std::size_t b = 0; b < batch; ++b) {
    if (x[b].rows() != shape_.numeric_channels || x[b].cols() != length) {
      throw InvalidArgument("Denoiser::pack: numeric sample " + std::to_string(b) + " has the wrong shape");
    }
    if (c[b].categories() != shape_.categories || (c[b].num_channels() > 0 && c[b].length() != length)) {
      throw InvalidArgument("Denoiser::pack: lattice " + std::to_string(b) + " does not match the channel layout");
    }
    for (Eigen::Index l = 0; l < length; ++l) {
      auto col = out.col(l * static_cast<Eigen::Index>(batch) + static_cast<Eigen::Index>(b));
      Eigen::Index row = 0;
      col.head(shape_.numeric_channels) = x[b].col(l);
      row += shape_.numeric_channels;
      for (const auto& ch : c[b].channels) {
        col.segment(row, ch.rows()) = ch.col(l);
        row += ch.rows();
      }
    }
  }
  return out;
}

DenoiserOutput Denoiser::unpack(const Eigen::MatrixXd& output, int batch, int b) const {
  const Eigen::Index length = output.cols() / batch;
  DenoiserOutput o;
  o.eps_pred.resize(shape_.numeric_channels, length);
  o.logits.reserve(shape_.categories.size());
  for (int k : shape_.categories) o.logits.emplace_back(k, length);
  for (Eigen::Index l = 0; l < length; ++l) {
    const auto col = output.col(l * batch + b);
    o.eps_pred.col(l) = col.head(shape_.numeric_channels);
    Eigen::Index row = shape_.numeric_channels;
    for (auto& lg : o.logits) {
      lg.col(l) = col.segment(row, lg.rows());
      row += lg.rows();
    }
  }
  return o;
}

void Denoiser::scatter(Eigen::MatrixXd& batched, int batch, int b, const NumericMatrix& d_eps,
                       const CategoryLogits& d_logits) const {
  const Eigen::Index length = batched.cols() / batch;
  for (Eigen::Index l = 0; l < length; ++l) {
    auto col = batched.col(l * batch + b);
    col.head(shape_.numeric_channels) = d_eps.col(l);
    Eigen::Index row = shape_.numeric_channels;
    for (const auto& lg : d_logits) {
      col.segment(row, lg.rows()) = lg.col(l);
      row += lg.rows();
    }
  }
}

DenoiserOutput Denoiser::forward(const nn::ParamStore& params, const NumericMatrix& x_t, const OneHotSequence& c_t,
                                 int t) const {
  const Eigen::MatrixXd in = pack(std::span<const NumericMatrix>(&x_t, 1), std::span<const OneHotSequence>(&c_t, 1));
  const int steps[1] = {t};
  return unpack(forward(params, in, steps), 1, 0);
}

std::vector<Denoiser::ParamGroup> Denoiser::param_groups(const nn::ParamStore& params) const {
  nn::require_same_layout(params, layout_, "Denoiser::param_groups");
  std::vector<ParamGroup> groups;
  auto whole = [&](std::size_t i) { return ParamGroup::Slice{i, 0, params[i].rows()}; };

  groups.push_back({"embed", {whole(fc1_w_), whole(fc1_b_), whole(fc2_w_), whole(fc2_b_), whole(fc3_w_),
                              whole(fc3_b_)}});
  const Eigen::Index h = shape_.direction_width();
  const char* gate_names[4] = {"i", "f", "g", "o"};
  for (std::size_t k = 0; k < lstm_.size(); ++k) {
    const std::string prefix =
        "rnn.l" + std::to_string(k / 2) + "." + (k % 2 == 0 ? "fwd" : "bwd") + ".gate_";
    for (int gate = 0; gate < 4; ++gate) {
      const Eigen::Index r0 = gate * h;
      groups.push_back({prefix + gate_names[gate],
                        {{lstm_[k].w_ih, r0, h}, {lstm_[k].w_hh, r0, h}, {lstm_[k].bias, r0, h}}});
    }
  }
  groups.push_back({"norm", {whole(norm_gain_), whole(norm_bias_)}});
  groups.push_back({"out", {whole(out_w_), whole(out_b_)}});
  return groups;
}

}  // namespace timediff
