#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "stgen/dse.hpp"
#include "stgen/reference.hpp"
#include "stgen/sim.hpp"

using namespace stgen;

namespace {

const TensorAlgebra& gemm(std::int64_t n) {
  static std::map<std::int64_t, TensorAlgebra> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    const std::string b = std::to_string(n);
    it = cache.emplace(n, parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=" + b + " n=" + b + " k=" + b)).first;
  }
  return it->second;
}

const IntMatrix kOs{{1, 0, 0}, {0, 1, 0}, {1, 1, 1}};

void BM_ReuseSpace(benchmark::State& state) {
  const IntMatrix access{{1, 0, 0}, {0, 0, 1}};
  const SttMatrix t{kOs, {"m", "n", "k"}};
  for (auto _ : state) benchmark::DoNotOptimize(reuse_space(access, t));
}
BENCHMARK(BM_ReuseSpace);

void BM_Analyze(benchmark::State& state) {
  const SttMatrix t{kOs, {"m", "n", "k"}};
  for (auto _ : state) benchmark::DoNotOptimize(analyze_dataflow(gemm(16), t));
}
BENCHMARK(BM_Analyze);

void BM_Enumerate(benchmark::State& state) {
  EnumerateOptions eo;
  eo.array = {16, 16};
  eo.alphabet = {0, 1};
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_designs(gemm(16), eo));
}
BENCHMARK(BM_Enumerate)->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
  GenerateOptions g;
  g.tiling.array = {16, 16};
  for (auto _ : state) benchmark::DoNotOptimize(generate_arch(gemm(16), {kOs, {"m", "n", "k"}}, g));
}
BENCHMARK(BM_Generate)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  const auto& a = gemm(state.range(0));
  GenerateOptions g;
  g.tiling.array = {16, 16};
  const auto arch = generate_arch(a, {kOs, {"m", "n", "k"}}, g);
  const auto in = random_int_inputs(a, 1);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(arch, in));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_EstimateCost(benchmark::State& state) {
  GenerateOptions g;
  g.tiling.array = {16, 16};
  const auto arch = generate_arch(gemm(16), {kOs, {"m", "n", "k"}}, g);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_cost(arch, 16));
}
BENCHMARK(BM_EstimateCost);

}  // namespace

BENCHMARK_MAIN();
