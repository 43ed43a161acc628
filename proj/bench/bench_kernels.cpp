// Serial reference paths against their OpenMP counterparts.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "recipesnap/evaluation.hpp"
#include "recipesnap/retrieval.hpp"
#include "recipesnap/triplet.hpp"

using namespace recipesnap;

namespace {

RecipeLibrary make_library(std::size_t n, std::size_t dim) {
  const auto data = generate_synthetic_pairs(n, 4, dim, 0.0, 1);
  RecipeLibrary lib(dim);
  for (std::size_t i = 0; i < n; ++i) {
    RecipeRecord r;
    r.id = data.ids[i];
    r.title = "r";
    lib.add_entry(std::move(r), Embedding(data.targets.row(i)));
  }
  return lib;
}

Embedding make_query(std::size_t dim) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(gen);
  return Embedding(std::move(v));
}

void BM_TopkReference(benchmark::State& state) {
  const auto lib = make_library(static_cast<std::size_t>(state.range(0)), 64);
  const auto q = make_query(64);
  for (auto _ : state) benchmark::DoNotOptimize(query_topk_reference(lib, q, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TopkChunkedSerial(benchmark::State& state) {
  const auto lib = make_library(static_cast<std::size_t>(state.range(0)), 64);
  const auto q = make_query(64);
  for (auto _ : state) benchmark::DoNotOptimize(query_topk(lib, q, 10, {4096, false}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TopkChunkedParallel(benchmark::State& state) {
  const auto lib = make_library(static_cast<std::size_t>(state.range(0)), 64);
  const auto q = make_query(64);
  for (auto _ : state) benchmark::DoNotOptimize(query_topk(lib, q, 10, {4096, true}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Gradient at a fixed thread count; one thread is the serial baseline.
void BM_Gradient(benchmark::State& state) {
  const auto data = generate_synthetic_pairs(64, 32, 32, 0.05, 3);
  const auto params = init_params(32, 32, 3);
  TrainConfig cfg;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(params, data.features, data.targets, cfg));
  omp_set_num_threads(saved);
}

}  // namespace

BENCHMARK(BM_TopkReference)->Arg(10000)->Arg(100000);
BENCHMARK(BM_TopkChunkedSerial)->Arg(10000)->Arg(100000);
BENCHMARK(BM_TopkChunkedParallel)->Arg(10000)->Arg(100000);
BENCHMARK(BM_Gradient)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
