// Compares the production conv kernels with the direct-loop reference.
//
//   ./build/bench/bench_kernels --benchmark_filter=Conv
#include <benchmark/benchmark.h>

#include <random>

#include "lumiswap/kernels.hpp"

namespace {

using lumiswap::Tensor;
namespace k = lumiswap::kernels;

struct Problem {
  Tensor in;
  Tensor dout;
  std::vector<float> weight;
  std::vector<float> bias;
  int cout;
};

Problem make_problem(int cin, int cout, int side) {
  std::mt19937 rng(42);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Problem p{Tensor(cin, side, side), Tensor(cout, side, side),
            std::vector<float>(static_cast<std::size_t>(cout) * cin * 9), std::vector<float>(cout), cout};
  for (auto& v : p.in.data) v = n(rng);
  for (auto& v : p.dout.data) v = n(rng);
  for (auto& v : p.weight) v = 0.05f * n(rng);
  return p;
}

void args(benchmark::internal::Benchmark* b) {
  b->Args({3, 32, 128})->Args({32, 32, 64})->Args({64, 64, 32})->Args({256, 256, 8})->Unit(benchmark::kMillisecond);
}

void BM_ConvForward(benchmark::State& state) {
  auto p = make_problem(state.range(0), state.range(1), state.range(2));
  Tensor out;
  for (auto _ : state) {
    k::conv2d_forward(p.in, p.weight, p.bias, p.cout, 3, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * p.weight.size() * p.in.plane(),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_ConvForwardReference(benchmark::State& state) {
  auto p = make_problem(state.range(0), state.range(1), state.range(2));
  Tensor out;
  for (auto _ : state) {
    k::reference::conv2d_forward(p.in, p.weight, p.bias, p.cout, 3, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * p.weight.size() * p.in.plane(),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_ConvBackward(benchmark::State& state) {
  auto p = make_problem(state.range(0), state.range(1), state.range(2));
  std::vector<float> dw(p.weight.size()), db(p.bias.size());
  Tensor din;
  for (auto _ : state) {
    k::conv2d_backward(p.in, p.weight, 3, p.dout, &din, dw, db);
    benchmark::DoNotOptimize(din.data.data());
  }
}

void BM_ConvBackwardReference(benchmark::State& state) {
  auto p = make_problem(state.range(0), state.range(1), state.range(2));
  std::vector<float> dw(p.weight.size()), db(p.bias.size());
  Tensor din;
  for (auto _ : state) {
    k::reference::conv2d_backward(p.in, p.weight, 3, p.dout, &din, dw, db);
    benchmark::DoNotOptimize(din.data.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward)->Apply(args);
BENCHMARK(BM_ConvForwardReference)->Apply(args);
BENCHMARK(BM_ConvBackward)->Apply(args);
BENCHMARK(BM_ConvBackwardReference)->Apply(args);

BENCHMARK_MAIN();
