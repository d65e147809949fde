#include <benchmark/benchmark.h>

#include <vector>

#include "timediff/denoiser.hpp"
#include "timediff/eval/nnaa.hpp"
#include "timediff/multinomial.hpp"
#include "timediff/nn/activations.hpp"
#include "timediff/nn/gru.hpp"
#include "timediff/runtime.hpp"
#include "timediff/schedule.hpp"

namespace td = timediff;

namespace {

// Desk-corpus shape: 2 numerical channels, one K = 2 categorical channel and
// two K = 2 mask channels, 24 steps.
td::DenoiserShape desk_shape() { return td::DenoiserShape::with_defaults(2, {2, 2, 2}); }

Eigen::MatrixXd random_input(const td::DenoiserShape& s, int batch, int length) {
  return Eigen::MatrixXd::Random(s.input_width(), static_cast<Eigen::Index>(batch) * length);
}

void BM_DenoiserForwardSharedStep(benchmark::State& state) {
  const td::Denoiser d(desk_shape());
  auto p = d.make_params();
  td::nn::RngStream rng(1);
  d.initialize(p, rng);
  const int batch = static_cast<int>(state.range(0));
  const auto in = random_input(d.shape(), batch, 24);
  const std::vector<int> steps(static_cast<std::size_t>(batch), 500);
  for (auto _ : state) benchmark::DoNotOptimize(d.forward(p, in, steps));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForwardSharedStep)->Arg(32)->Arg(256);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  const td::Denoiser d(desk_shape());
  auto p = d.make_params();
  td::nn::RngStream rng(1);
  d.initialize(p, rng);
  const int batch = static_cast<int>(state.range(0));
  const auto in = random_input(d.shape(), batch, 24);
  std::vector<int> steps(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) steps[static_cast<std::size_t>(b)] = 1 + 31 * b;
  const Eigen::MatrixXd grad = Eigen::MatrixXd::Random(d.shape().output_width(), in.cols());
  for (auto _ : state) {
    td::DenoiserTrace trace;
    benchmark::DoNotOptimize(d.forward(p, in, steps, &trace));
    benchmark::DoNotOptimize(d.backward(p, trace, grad));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForwardBackward)->Arg(32);

void BM_Sigmoid(benchmark::State& state) {
  const Eigen::ArrayXXd x = Eigen::ArrayXXd::Random(16, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(td::nn::sigmoid(x));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Sigmoid)->Arg(256);

void BM_Tanh(benchmark::State& state) {
  const Eigen::ArrayXXd x = Eigen::ArrayXXd::Random(16, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(td::nn::tanh(x));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Tanh)->Arg(256);

void BM_GruForward(benchmark::State& state) {
  td::nn::ParamStore p;
  const td::nn::Gru gru(p, "gru.", 6, 24);
  td::nn::RngStream rng(2);
  gru.initialize(p, rng);
  const int batch = 128;
  const Eigen::MatrixXd in = Eigen::MatrixXd::Random(6, 24 * batch);
  for (auto _ : state) {
    td::nn::Gru::Trace trace;
    benchmark::DoNotOptimize(gru.forward(p, in, batch, &trace));
  }
}
BENCHMARK(BM_GruForward);

void BM_QPosterior(benchmark::State& state) {
  const auto schedule = td::cosine_schedule(1000);
  td::nn::RngStream rng(3);
  td::OneHotSequence probs;
  probs.channels.push_back(Eigen::MatrixXd::Constant(2, 24 * 256, 0.5));
  const auto ct = td::sample_categorical(probs, rng);
  const auto c0 = td::sample_categorical(probs, rng);
  for (auto _ : state) benchmark::DoNotOptimize(td::q_posterior(ct, c0, 500, schedule));
}
BENCHMARK(BM_QPosterior);

void BM_NearestNeighbour(benchmark::State& state) {
  const auto n = state.range(0);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(48, n);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(48, n);
  for (auto _ : state) benchmark::DoNotOptimize(td::eval::nn_distances(a, b, false));
  state.SetComplexityN(n);
}
BENCHMARK(BM_NearestNeighbour)->Arg(500)->Arg(2000);

void BM_CosineSchedule(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(td::cosine_schedule(1000));
}
BENCHMARK(BM_CosineSchedule);

}  // namespace
int main(int argc, char** argv) {
  td::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
