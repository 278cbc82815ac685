#include <benchmark/benchmark.h>

#include "deltastore/corpus.hpp"
#include "deltastore/hnsw.hpp"

using namespace deltastore;

namespace {

QuantizedBase make_vertex(uint64_t dim, uint64_t seed) {
  Tensor t;
  t.name = "v";
  t.shape = {dim};
  Rng rng(seed);
  t.data.resize(dim);
  for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return quantize_base(t);
}

void BM_HnswInsert(benchmark::State& state) {
  const uint64_t dim = static_cast<uint64_t>(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    state.PauseTiming();
    HnswIndex index(dim);
    std::vector<QuantizedBase> vertices;
    for (int i = 0; i < 200; ++i) vertices.push_back(make_vertex(dim, seed++));
    state.ResumeTiming();
    for (auto& qb : vertices) index.insert(std::move(qb));
  }
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_HnswInsert)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_HnswSearch(benchmark::State& state) {
  const uint64_t dim = static_cast<uint64_t>(state.range(0));
  HnswIndex index(dim);
  for (uint64_t i = 0; i < 2000; ++i) index.insert(make_vertex(dim, i));
  Rng rng(99);
  std::vector<double> query(dim);
  for (auto _ : state) {
    for (double& v : query) v = rng.uniform(-1.0, 1.0);
    benchmark::DoNotOptimize(index.search(query));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HnswSearch)->Arg(256)->Arg(1024);

}  // namespace
