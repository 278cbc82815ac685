#include "deltastore/compressor.hpp"

#include <cmath>
#include <thread>

#include "deltastore/loader.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace deltastore;
using deltastore::testing::TempDir;

namespace {

SaveRequest request_for(const GeneratedModel& gm, double tolerance = 0x1p-24,
                        double tau = 0.16) {
  SaveRequest req;
  req.model_name = gm.name;
  req.architecture = gm.graph;
  req.tensors = gm.tensors;
  req.tolerance = PrecisionTolerance(tolerance);
  req.threshold = SimilarityThreshold(tau);
  return req;
}

CorpusSpec family_spec(uint32_t families, uint32_t per_family, uint64_t seed) {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{64, 64}, {2048}};
  spec.families = families;
  spec.models_per_family = per_family;
  spec.sigma = 0.02;
  spec.seed = seed;
  return spec;
}

double max_abs_error(Store& store, const GeneratedModel& gm) {
  const LoadedModel lm = load_model(store, gm.name, LoadBits::full());
  double worst = 0.0;
  for (const Tensor& src : gm.tensors) {
    const Tensor back = reconstruct_tensor(lm.entry(src.name));
    REQUIRE(back.data.size() == src.data.size());
    for (size_t i = 0; i < src.data.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(back.data[i]) -
                                       static_cast<double>(src.data[i])));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("compressor");

TEST_CASE("should_compress is inclusive at the threshold") {
  const SimilarityThreshold tau(0.16);
  CHECK(should_compress(0.15, tau));
  CHECK(should_compress(0.16, tau));
  CHECK_FALSE(should_compress(0.161, tau));
}

TEST_CASE("empty model saves a valid page with ratio 1") {
  TempDir dir;
  Store store(dir.path());
  GeneratedModel gm;
  gm.name = "empty";
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {};
  spec.seed = 1;
  spec.name_prefix = "empty";
  gm = generate_models(spec)[0];
  const SaveReport report = compress_model(request_for(gm), store);
  CHECK(report.ratio == 1.0);
  CHECK(report.original_bytes == 0);
  CHECK(store.catalog().get(gm.name).model_id == report.model_id);
}

TEST_CASE("saving the same model twice dedups every tensor") {
  TempDir dir;
  Store store(dir.path());
  GeneratedModel gm = generate_models(family_spec(1, 1, 21))[0];

  GeneratedModel first = gm;
  first.name = "orig";
  const SaveReport r1 = compress_model(request_for(first), store);
  CHECK(r1.new_vertex_count == 2);  // one per tensor shape

  GeneratedModel second = gm;
  second.name = "copy";
  const SaveReport r2 = compress_model(request_for(second), store);
  CHECK(r2.new_vertex_count == 0);
  for (const TensorReport& tr : r2.tensors) {
    CHECK_FALSE(tr.new_vertex);
    // Delta ranges stay within the 8-bit base quantization noise: one bin
    // of (value range)/255, far below tau.
    CHECK(tr.delta_range <= 2.0 * 0.056 * 2 / 255.0);
  }
  CHECK(r2.ratio > r1.ratio);
  // Both models reconstruct within tolerance.
  CHECK(max_abs_error(store, first) <= 0x1p-24);
  CHECK(max_abs_error(store, second) <= 0x1p-24);
}

TEST_CASE("fine-tune family members delta-compress against the base") {
  TempDir dir;
  Store store(dir.path());
  CorpusSpec spec = family_spec(1, 6, 33);
  spec.sigma = 0.02;  // perturbation well inside tau/8 of the value range
  const std::vector<GeneratedModel> family = generate_models(spec);

  const SaveReport base_report = compress_model(request_for(family[0]), store);
  CHECK(base_report.new_vertex_count == 2);
  for (size_t m = 1; m < family.size(); ++m) {
    const SaveReport r = compress_model(request_for(family[m]), store);
    CHECK(r.new_vertex_count == 0);
    for (const TensorReport& tr : r.tensors) CHECK_FALSE(tr.new_vertex);
  }
  for (const GeneratedModel& gm : family) {
    CHECK(max_abs_error(store, gm) <= 0x1p-24);
  }
}

TEST_CASE("duplicate names are rejected before any work") {
  TempDir dir;
  Store store(dir.path());
  GeneratedModel gm = generate_models(family_spec(1, 1, 5))[0];
  compress_model(request_for(gm), store);
  CHECK_THROWS_AS(compress_model(request_for(gm), store), DuplicateName);
}

TEST_CASE("tiny tensors are stored inline and skip the index") {
  TempDir dir;
  Store store(dir.path());
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{3, 4}, {15}, {64}};
  spec.seed = 9;
  spec.name_prefix = "tiny";
  const GeneratedModel gm = generate_models(spec)[0];
  const SaveReport report = compress_model(request_for(gm), store);
  REQUIRE(report.tensors.size() == 3);
  CHECK(report.tensors[0].inlined);  // 12 elements
  CHECK(report.tensors[1].inlined);  // 15 elements
  CHECK_FALSE(report.tensors[2].inlined);
  CHECK(report.new_vertex_count == 1);
  // Inline tensors come back exactly.
  const LoadedModel lm = load_model(store, gm.name, LoadBits::full());
  const Tensor back = reconstruct_tensor(lm.entry("t0"));
  CHECK(back.data == gm.tensors[0].data);
}

TEST_CASE("tolerance failure aborts the save atomically") {
  TempDir dir;
  Store store(dir.path());
  GeneratedModel gm = generate_models(family_spec(1, 1, 13))[0];
  SaveRequest req = request_for(gm, /*tolerance=*/1e-14);
  // The residual range of roughly range/255 would need > 32 bits.
  CHECK_THROWS_AS(compress_model(req, store), ToleranceTooTight);
  CHECK(store.catalog().size() == 0);
  CHECK_FALSE(std::filesystem::exists(dir / "pages" / "probe"));
  // Orphan vertices may remain; a retry under a usable tolerance succeeds.
  const SaveReport report = compress_model(request_for(gm), store);
  CHECK(report.model_id > 0);
}

TEST_CASE("mismatched tensors are rejected") {
  TempDir dir;
  Store store(dir.path());
  GeneratedModel gm = generate_models(family_spec(1, 1, 14))[0];
  SaveRequest req = request_for(gm);
  req.tensors.pop_back();
  CHECK_THROWS_AS(compress_model(req, store), InvalidTensor);
  req = request_for(gm);
  req.tensors[0].name = "wrong";
  CHECK_THROWS_AS(compress_model(req, store), InvalidTensor);
  req = request_for(gm);
  req.tensors[0].data[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(compress_model(req, store), InvalidTensor);
}

TEST_CASE("multi-threaded save keeps the error bound") {
  TempDir dir;
  Store store(dir.path());
  const std::vector<GeneratedModel> family =
      generate_models(family_spec(2, 3, 55));
  CompressOptions opts;
  opts.threads = 4;
  for (const GeneratedModel& gm : family) {
    compress_model(request_for(gm), store, opts);
  }
  for (const GeneratedModel& gm : family) {
    CHECK(max_abs_error(store, gm) <= 0x1p-24);
  }
}

TEST_CASE("concurrent saves of different models keep the bound") {
  TempDir dir;
  Store store(dir.path());
  const std::vector<GeneratedModel> models =
      generate_models(family_spec(4, 2, 77));
  std::atomic<bool> failed{false};
  std::vector<std::thread> threads;
  for (size_t i = 0; i < models.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        compress_model(request_for(models[i]), store);
      } catch (...) {
        failed = true;
      }
    });
  }
  for (std::thread& t : threads) t.join();
  REQUIRE_FALSE(failed.load());
  for (const GeneratedModel& gm : models) {
    CHECK(max_abs_error(store, gm) <= 0x1p-24);
  }
}

TEST_SUITE_END();
