#include <benchmark/benchmark.h>

#include <filesystem>

#include "deltastore/compressor.hpp"
#include "deltastore/corpus.hpp"
#include "deltastore/loader.hpp"
#include "deltastore/page.hpp"
#include "deltastore/pipeline.hpp"

using namespace deltastore;

namespace {

std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("deltastore-bench-" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

CorpusSpec mlp_spec() {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {64, 128, 16};
  spec.families = 1;
  spec.models_per_family = 2;
  spec.sigma = 0.02;
  spec.seed = 7;
  return spec;
}

SaveRequest request_for(const GeneratedModel& gm) {
  SaveRequest req;
  req.model_name = gm.name;
  req.architecture = gm.graph;
  req.tensors = gm.tensors;
  return req;
}

void BM_PageWriteRead(benchmark::State& state) {
  const auto dir = scratch_dir("page");
  std::vector<DeltaRecord> records;
  Rng rng(5);
  for (int i = 0; i < 64; ++i) {
    DeltaRecord r;
    r.name = "t" + std::to_string(i);
    r.shape = {4096};
    r.base = BaseRef{4096, static_cast<uint64_t>(i)};
    r.nbit = 13;
    r.params = {0x1p-23, -0.001};
    r.payload.resize(packed_byte_size(4096, 13));
    for (uint8_t& b : r.payload) b = static_cast<uint8_t>(rng.next_u64());
    records.push_back(std::move(r));
  }
  const auto path = dir / "bench.page";
  size_t bytes = 0;
  for (auto _ : state) {
    write_page(records, path);
    PageReader reader(path);
    benchmark::DoNotOptimize(reader.read_all());
    bytes = reader.file_bytes();
  }
  state.SetBytesProcessed(state.iterations() * bytes);
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_PageWriteRead)->Unit(benchmark::kMillisecond);

void BM_SaveModel(benchmark::State& state) {
  const auto dir = scratch_dir("save");
  const std::vector<GeneratedModel> models = generate_models(mlp_spec());
  uint64_t round = 0;
  Store store(dir);
  compress_model(request_for(models[0]), store);
  for (auto _ : state) {
    GeneratedModel variant = models[1];
    variant.name = "variant" + std::to_string(round++);
    benchmark::DoNotOptimize(compress_model(request_for(variant), store));
  }
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_SaveModel)->Unit(benchmark::kMillisecond);

void BM_LoadExecute(benchmark::State& state) {
  const bool pipelined = state.range(0) == 1;
  const auto dir = scratch_dir(pipelined ? "pipe" : "seq");
  Store store(dir);
  const std::vector<GeneratedModel> models = generate_models(mlp_spec());
  for (const GeneratedModel& gm : models) compress_model(request_for(gm), store);
  std::map<std::string, Tensor> inputs;
  Tensor x;
  x.name = "x";
  x.shape = {1, 64};
  Rng rng(8);
  x.data.resize(64);
  for (float& v : x.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  inputs["x"] = std::move(x);

  for (auto _ : state) {
    if (pipelined) {
      benchmark::DoNotOptimize(
          pipelined_load_execute(store, models[1].name, inputs));
    } else {
      const LoadedModel lm = load_model(store, models[1].name, LoadBits::at(8));
      benchmark::DoNotOptimize(run_augmented(lm, inputs));
    }
  }
  state.SetItemsProcessed(state.iterations());
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_LoadExecute)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
