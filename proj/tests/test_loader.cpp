#include "deltastore/loader.hpp"

#include <cmath>

#include "deltastore/compressor.hpp"
#include "deltastore/io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace deltastore;
using deltastore::testing::TempDir;

namespace {

SaveRequest request_for(const GeneratedModel& gm) {
  SaveRequest req;
  req.model_name = gm.name;
  req.architecture = gm.graph;
  req.tensors = gm.tensors;
  return req;
}

}  // namespace

TEST_SUITE_BEGIN("loader");

TEST_CASE("full load reconstructs within p") {
  TempDir dir;
  Store store(dir.path());
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {32, 64, 16};
  spec.seed = 71;
  const GeneratedModel gm = generate_models(spec)[0];
  compress_model(request_for(gm), store);

  const LoadedModel lm = load_model(store, gm.name, LoadBits::full());
  for (const Tensor& src : gm.tensors) {
    const Tensor back = reconstruct_tensor(lm.entry(src.name));
    CHECK(back.shape == src.shape);
    for (size_t i = 0; i < src.data.size(); ++i) {
      CHECK(std::abs(static_cast<double>(back.data[i]) -
                     static_cast<double>(src.data[i])) <= 0x1p-24);
    }
  }
}

TEST_CASE("8-bit load halves the resident payload of 16-bit records") {
  TempDir dir;
  Store store(dir.path());
  // Engineer a model whose delta lands at nbit 16: save a base model, then
  // a variant offset by a field with range near 0.0078.
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{4096}};
  spec.families = 1;
  spec.models_per_family = 2;
  spec.sigma = 0.0033;  // intra-family delta range ~0.007 -> 16 bits
  spec.seed = 91;
  const std::vector<GeneratedModel> models = generate_models(spec);
  compress_model(request_for(models[0]), store);
  compress_model(request_for(models[1]), store);

  const LoadedModel full = load_model(store, models[1].name, LoadBits::full());
  REQUIRE(full.entries.size() == 1);
  const int nbit = full.entries[0].record.nbit;
  REQUIRE(nbit == 16);

  const LoadedModel half = load_model(store, models[1].name, LoadBits::at(8));
  CHECK(half.entries[0].record.nbit == 8);
  CHECK(half.entries[0].record.payload.size() * 2 ==
        full.entries[0].record.payload.size());
  CHECK(half.resident_payload_bytes() < full.resident_payload_bytes());

  // Flexible-loading error bound: p * 2^(nbit-8) per element.
  const Tensor src = models[1].tensors[0];
  const Tensor back = reconstruct_tensor(half.entries[0]);
  const double bound = 0x1p-24 * std::exp2(nbit - 8);
  for (size_t i = 0; i < src.data.size(); ++i) {
    CHECK(std::abs(static_cast<double>(back.data[i]) -
                   static_cast<double>(src.data[i])) <= bound);
  }
}

TEST_CASE("a base shared by many tensors is fetched once") {
  TempDir dir;
  Store store(dir.path());
  // Three identical tensors in one model share one vertex.
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{512}, {512}, {512}};
  spec.seed = 17;
  GeneratedModel gm = generate_models(spec)[0];
  gm.tensors[1].data = gm.tensors[0].data;
  gm.tensors[2].data = gm.tensors[0].data;
  const SaveReport report = compress_model(request_for(gm), store);
  CHECK(report.new_vertex_count == 1);

  const LoadedModel lm = load_model(store, gm.name, LoadBits::full());
  REQUIRE(lm.share_counts.size() == 1);
  CHECK(lm.share_counts.begin()->second == 3);
  // All entries point at the same fetched payload.
  CHECK(lm.entries[0].base.get() == lm.entries[1].base.get());
  CHECK(lm.entries[1].base.get() == lm.entries[2].base.get());
}

TEST_CASE("inline records ignore the requested bit width") {
  TempDir dir;
  Store store(dir.path());
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{6}};
  spec.seed = 23;
  const GeneratedModel gm = generate_models(spec)[0];
  compress_model(request_for(gm), store);
  const LoadedModel lm = load_model(store, gm.name, LoadBits::at(8));
  CHECK(lm.entries[0].record.nbit == 32);
  const Tensor back = reconstruct_tensor(lm.entries[0]);
  CHECK(back.data == gm.tensors[0].data);
}

TEST_CASE("unknown models and corrupt pages") {
  TempDir dir;
  Store store(dir.path());
  CHECK_THROWS_AS(load_model(store, "ghost", LoadBits::full()), NotFound);

  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{64}};
  spec.seed = 29;
  const GeneratedModel gm = generate_models(spec)[0];
  compress_model(request_for(gm), store);
  const CatalogEntry entry = store.catalog().get(gm.name);
  // Corrupt one header byte of the page.
  const auto path = store.resolve(entry.page_path);
  std::vector<uint8_t> bytes = read_file_bytes(path);
  bytes[8] ^= 0x10;  // inside the record table
  write_file_atomic(path, bytes, /*read_only=*/true);
  CHECK_THROWS_AS(load_model(store, gm.name, LoadBits::full()), CorruptStore);
}

TEST_CASE("a reopened store serves models with full fidelity") {
  TempDir dir;
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {16, 24, 4};
  spec.seed = 37;
  const GeneratedModel gm = generate_models(spec)[0];
  {
    Store store(dir.path());
    compress_model(request_for(gm), store);
  }
  Store reopened(dir.path());
  const LoadedModel lm = load_model(reopened, gm.name, LoadBits::full());
  for (const Tensor& src : gm.tensors) {
    const std::vector<double> back = reconstruct_f64(lm.entry(src.name));
    for (size_t i = 0; i < src.data.size(); ++i) {
      CHECK(std::abs(back[i] - static_cast<double>(src.data[i])) <= 0x1p-24);
    }
  }
}

TEST_CASE("load by id equals load by name") {
  TempDir dir;
  Store store(dir.path());
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{128}};
  spec.seed = 31;
  const GeneratedModel gm = generate_models(spec)[0];
  const SaveReport report = compress_model(request_for(gm), store);
  const LoadedModel by_name = load_model(store, gm.name, LoadBits::full());
  const LoadedModel by_id = load_model(store, report.model_id, LoadBits::full());
  CHECK(by_name.catalog_entry.model_id == by_id.catalog_entry.model_id);
  CHECK(by_name.entries.size() == by_id.entries.size());
}

TEST_SUITE_END();
