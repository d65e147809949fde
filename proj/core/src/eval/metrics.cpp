#include "timediff/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timediff/data/corpus.hpp"
#include "timediff/error.hpp"
#include "timediff/nn/activations.hpp"
#include "timediff/nn/gru.hpp"
#include "timediff/nn/optim.hpp"

namespace timediff::eval {

namespace {

constexpr int kMinSamplesPerSide = 20;

std::vector<const Eigen::MatrixXd*> pick(const std::vector<Eigen::MatrixXd>& pool, int count, nn::RngStream& rng) {
  std::vector<const Eigen::MatrixXd*> out(static_cast<std::size_t>(count));
  for (auto& p : out) p = &pool[rng.uniform_index(pool.size())];
  return out;
}

std::vector<const Eigen::MatrixXd*> all_of(const std::vector<Eigen::MatrixXd>& pool) {
  std::vector<const Eigen::MatrixXd*> out;
  out.reserve(pool.size());
  for (const auto& p : pool) out.push_back(&p);
  return out;
}

struct Classifier {
  nn::ParamStore params;
  nn::Gru gru;
  std::size_t head_w, head_b;

  Classifier(int width, int hidden)
      : gru(params, "gru.", width, hidden),
        head_w(params.add("head.w", 1, hidden)),
        head_b(params.add("head.b", 1, 1)) {}

  Eigen::RowVectorXd logits(const Eigen::MatrixXd& x, int batch, nn::Gru::Trace* trace) const {
    const Eigen::MatrixXd h = gru.forward(params, x, batch, trace);
    const Eigen::Index last = h.cols() - batch;
    Eigen::RowVectorXd z = params[head_w] * h.middleCols(last, batch);
    z.array() += params[head_b](0, 0);
    return z;
  }
};

}  // namespace

double discriminative_score(const FeatureEncoder& encoder, const data::Corpus& real, const data::Corpus& synth,
                            const MetricTrainerConfig& config, std::uint64_t seed) {
  if (real.size() < kMinSamplesPerSide || synth.size() < kMinSamplesPerSide) {
    throw InvalidArgument("discriminative_score: need at least 20 samples on each side");
  }
  if (config.batch < 2 || config.steps < 0) throw InvalidArgument("discriminative_score: bad trainer config");
  const auto [real_train, real_test] = data::split(real, config.train_fraction, seed ^ 0x5265616cULL);
  const auto [synth_train, synth_test] = data::split(synth, config.train_fraction, seed ^ 0x53796e74ULL);
  if (real_train.empty() || real_test.empty() || synth_train.empty() || synth_test.empty()) {
    throw InvalidArgument("discriminative_score: split left an empty side");
  }
  const auto rt = encoder.sequences(real_train);
  const auto st = encoder.sequences(synth_train);
  const auto re = encoder.sequences(real_test);
  const auto se = encoder.sequences(synth_test);

  const int width = encoder.feature_width();
  const int length = encoder.length();
  Classifier model(width, config.hidden_multiple * width);
  auto init_rng = nn::RngStream::derive(seed, nn::streams::kInit);
  model.gru.initialize(model.params, init_rng);
  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.gru.hidden_width()));
    auto& w = model.params[model.head_w];
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(0, j) = init_rng.uniform(-bound, bound);
  }
  nn::Adam adam(model.params, {config.learning_rate, 0.9, 0.999, 1e-8});
  auto data_rng = nn::RngStream::derive(seed, nn::streams::kData);

  const int half = config.batch / 2;
  const int batch = 2 * half;
  Eigen::RowVectorXd labels(batch);
  labels.head(half).setOnes();
  labels.tail(half).setZero();
  for (int step = 0; step < config.steps; ++step) {
    auto seqs = pick(rt, half, data_rng);
    const auto fake = pick(st, half, data_rng);
    seqs.insert(seqs.end(), fake.begin(), fake.end());
    const Eigen::MatrixXd x = pack_time_major(seqs, 0, length);
    nn::Gru::Trace trace;
    const Eigen::RowVectorXd z = model.logits(x, batch, &trace);
    // d mean BCE / d logit = (sigmoid(z) - y) / B
    const Eigen::RowVectorXd dz =
        ((nn::sigmoid(z.array()) - labels.array()) / static_cast<double>(batch)).matrix();
    nn::ParamStore grads = model.params.zeros_like();
    grads[model.head_w] = dz * trace.hidden.rightCols(batch).transpose();
    grads[model.head_b](0, 0) = dz.sum();
    Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(model.gru.hidden_width(), x.cols());
    dh.rightCols(batch) = model.params[model.head_w].transpose() * dz;
    model.gru.backward(model.params, trace, dh, batch, grads);
    adam.step(model.params, grads);
  }

  auto count_correct = [&](const std::vector<Eigen::MatrixXd>& seqs, bool is_real) {
    const auto ptrs = all_of(seqs);
    const Eigen::MatrixXd x = pack_time_major(ptrs, 0, length);
    const Eigen::RowVectorXd z = model.logits(x, static_cast<int>(ptrs.size()), nullptr);
    return is_real ? (z.array() > 0.0).count() : (z.array() <= 0.0).count();
  };
  const double correct = static_cast<double>(count_correct(re, true) + count_correct(se, false));
  const double accuracy = correct / static_cast<double>(re.size() + se.size());
  return std::abs(0.5 - accuracy);
}

double masked_mae(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target, const Eigen::MatrixXi& mask) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols() || mask.rows() != target.rows() ||
      mask.cols() != target.cols()) {
    throw InvalidArgument("masked_mae: shape mismatch");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index j = 0; j < target.cols(); ++j) {
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      if (mask(i, j) != 0) continue;
      sum += std::abs(prediction(i, j) - target(i, j));
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double predictive_score(const FeatureEncoder& encoder, const data::Corpus& train, const data::Corpus& test,
                        const MetricTrainerConfig& config, std::uint64_t seed) {
  const int length = encoder.length();
  const int p_r = encoder.reference().numeric_channels;
  if (length < 2) throw InvalidArgument("predictive_score: sequences need at least 2 steps");
  if (p_r < 1) throw InvalidArgument("predictive_score: no numerical channels to predict");
  if (train.empty() || test.empty()) throw InvalidArgument("predictive_score: empty corpus");
  if (config.batch < 1 || config.steps < 0) throw InvalidArgument("predictive_score: bad trainer config");

  const auto train_in = encoder.sequences(train);
  const auto test_in = encoder.sequences(test);
  // Targets are the scaled values and their mask, rows [0, p_r) and [p_r, 2 p_r) of the raw features.
  const auto train_raw = encoder.raw_sequences(train);
  const auto test_raw = encoder.raw_sequences(test);

  const int width = encoder.feature_width();
  const int hidden = config.hidden_multiple * width;
  nn::ParamStore params;
  nn::Gru gru(params, "gru.", width, hidden);
  const std::size_t head_w = params.add("head.w", p_r, hidden);
  const std::size_t head_b = params.add("head.b", p_r, 1);
  auto init_rng = nn::RngStream::derive(seed, nn::streams::kInit);
  gru.initialize(params, init_rng);
  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto& w = params[head_w];
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = init_rng.uniform(-bound, bound);
  }
  nn::Adam adam(params, {config.learning_rate, 0.9, 0.999, 1e-8});
  auto data_rng = nn::RngStream::derive(seed, nn::streams::kData);

  auto predict = [&](const Eigen::MatrixXd& x, int batch, nn::Gru::Trace* trace) {
    const Eigen::MatrixXd h = gru.forward(params, x, batch, trace);
    Eigen::MatrixXd y = params[head_w] * h;
    y.colwise() += params[head_b].col(0);
    return y;
  };
  auto targets = [&](const std::vector<const Eigen::MatrixXd*>& raw, Eigen::MatrixXd& value, Eigen::MatrixXi& mask) {
    const Eigen::MatrixXd packed = pack_time_major(raw, 1, length - 1);
    value = packed.topRows(p_r);
    mask = packed.middleRows(p_r, p_r).cast<int>();
  };

  for (int step = 0; step < config.steps; ++step) {
    std::vector<const Eigen::MatrixXd*> in(static_cast<std::size_t>(config.batch));
    std::vector<const Eigen::MatrixXd*> raw(in.size());
    for (std::size_t b = 0; b < in.size(); ++b) {
      const auto i = data_rng.uniform_index(train_in.size());
      in[b] = &train_in[i];
      raw[b] = &train_raw[i];
    }
    const Eigen::MatrixXd x = pack_time_major(in, 0, length - 1);
    Eigen::MatrixXd target;
    Eigen::MatrixXi mask;
    targets(raw, target, mask);
    nn::Gru::Trace trace;
    const Eigen::MatrixXd y = predict(x, config.batch, &trace);
    const double observed = static_cast<double>((mask.array() == 0).count());
    if (observed == 0) continue;
    // d mean|y - target| / dy over observed entries
    Eigen::MatrixXd dy = ((y - target).array().sign() * (mask.array() == 0).cast<double>() / observed).matrix();
    nn::ParamStore grads = params.zeros_like();
    grads[head_w] = dy * trace.hidden.transpose();
    grads[head_b].col(0) = dy.rowwise().sum();
    const Eigen::MatrixXd dh = params[head_w].transpose() * dy;
    gru.backward(params, trace, dh, config.batch, grads);
    adam.step(params, grads);
  }

  const auto in = all_of(test_in);
  const auto raw = all_of(test_raw);
  const Eigen::MatrixXd x = pack_time_major(in, 0, length - 1);
  Eigen::MatrixXd target;
  Eigen::MatrixXi mask;
  targets(raw, target, mask);
  return masked_mae(predict(x, static_cast<int>(in.size()), nullptr), target, mask);
}

MetricSummary summarize(std::vector<double> values, std::vector<std::uint64_t> seeds) {
  MetricSummary s;
  s.values = std::move(values);
  s.seeds = std::move(seeds);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<std::uint64_t> rerun_seeds(std::uint64_t master_seed, int count) {
  auto rng = nn::RngStream::derive(master_seed, "reruns");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& s : seeds) s = rng.next_u64() >> 11;  // fits a JSON double exactly
  return seeds;
}

}  // namespace timediff::eval
