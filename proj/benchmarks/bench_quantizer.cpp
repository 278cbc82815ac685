#include <benchmark/benchmark.h>

#include "deltastore/corpus.hpp"
#include "deltastore/quantizer.hpp"

using namespace deltastore;

namespace {

Tensor make_tensor(uint64_t n, uint64_t seed) {
  Tensor t;
  t.name = "bench";
  t.shape = {n};
  Rng rng(seed);
  t.data.resize(n);
  for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_QuantizeBase(benchmark::State& state) {
  const Tensor t = make_tensor(static_cast<uint64_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantize_base(t));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * 4);
}
BENCHMARK(BM_QuantizeBase)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

void BM_DeltaQuantizeRoundTrip(benchmark::State& state) {
  const Tensor t = make_tensor(static_cast<uint64_t>(state.range(0)), 2);
  const QuantizedBase qb = quantize_base(t);
  const Tensor base = dequantize_base(qb);
  const DeltaVector dv = delta_encode(t, base);
  const PrecisionTolerance p;
  for (auto _ : state) {
    const QuantizedDelta qd = quantize_delta(dv, p, BaseRef{1, 0}, t.shape);
    benchmark::DoNotOptimize(dequantize_delta(qd));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * 4);
}
BENCHMARK(BM_DeltaQuantizeRoundTrip)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

void BM_TruncateMsb(benchmark::State& state) {
  const Tensor t = make_tensor(static_cast<uint64_t>(state.range(0)), 3);
  const QuantizedBase qb = quantize_base(t);
  const DeltaVector dv = delta_encode(t, dequantize_base(qb));
  const QuantizedDelta qd =
      quantize_delta(dv, PrecisionTolerance{}, BaseRef{1, 0}, t.shape);
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncate_msb(qd, 8));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TruncateMsb)->Arg(1 << 16)->Arg(1 << 20);

}  // namespace
