#include <benchmark/benchmark.h>

#include <random>

#include "ercmc/consistency.hpp"
#include "ercmc/context_model.hpp"
#include "ercmc/futures.hpp"
#include "ercmc/gradcheck.hpp"
#include "ercmc/metrics.hpp"
#include "synthetic.hpp"

using namespace ercmc;

namespace {

Tensor<double> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return Tensor<double>::from({rows, cols}, std::move(v));
}

ModelConfig bench_config(std::size_t d_m) {
  auto cfg = testing::small_config(d_m, 7);
  cfg.n_h = 8;
  cfg.window = 5;
  cfg.futures = 5;
  return cfg;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_matrix(6, n, 1);
  auto b = random_matrix(n, n, 2);
  Tape<double> tape;
  tape.set_enabled(false);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(tape, a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(6 * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(768);

static void BM_Predict(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  ContextModel<double> model(cfg, 1);
  const auto in = random_conversation(12, cfg.d_m, cfg.futures, cfg.num_classes, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(in));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.length));
}
BENCHMARK(BM_Predict)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  ContextModel<double> model(cfg, 1);
  zero_grads(model.parameters());
  const auto in = random_conversation(12, cfg.d_m, cfg.futures, cfg.num_classes, 2);
  Rng rng(3);
  for (auto _ : state) {
    Tape<double> tape;
    auto out = model.forward(tape, in, true, rng);
    tape.backward(out.loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.length));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackwardFloat(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  ContextModel<float> model(cfg, 1);
  zero_grads(model.parameters());
  const auto in = random_conversation(12, cfg.d_m, cfg.futures, cfg.num_classes, 2);
  Rng rng(3);
  for (auto _ : state) {
    Tape<float> tape;
    auto out = model.forward(tape, in, true, rng);
    tape.backward(out.loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.length));
}
BENCHMARK(BM_ForwardBackwardFloat)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_MockFutures(benchmark::State& state) {
  const auto data = testing::synthetic_corpus({static_cast<std::size_t>(state.range(0)), 6, 10});
  const auto emb = mock_encode(data.corpus, 64, 7);
  for (auto _ : state) benchmark::DoNotOptimize(build_mock_futures(data.corpus, emb, 5, 2, 7));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(data.corpus.utterance_count()));
}
BENCHMARK(BM_MockFutures)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

static void BM_WeightedF1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<std::size_t> gold(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    gold[i] = rng() % 7;
    pred[i] = rng() % 7;
  }
  for (auto _ : state) benchmark::DoNotOptimize(classification_metrics(gold, pred, 7, 0));
}
BENCHMARK(BM_WeightedF1)->Arg(1 << 12)->Arg(1 << 16);

BENCHMARK_MAIN();
