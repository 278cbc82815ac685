#include "deltastore/corpus.hpp"

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace deltastore;
using deltastore::testing::TempDir;

TEST_SUITE_BEGIN("corpus");

TEST_CASE("generation is deterministic per spec and seed") {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {8, 16, 4};
  spec.families = 2;
  spec.models_per_family = 3;
  spec.seed = 5;
  const auto a = generate_models(spec);
  const auto b = generate_models(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    REQUIRE(a[i].tensors.size() == b[i].tensors.size());
    for (size_t t = 0; t < a[i].tensors.size(); ++t) {
      CHECK(a[i].tensors[t].data == b[i].tensors[t].data);
    }
  }
  spec.seed = 6;
  const auto c = generate_models(spec);
  CHECK(c[0].tensors[0].data != a[0].tensors[0].data);
}

TEST_CASE("family member zero is the unperturbed base") {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{64}};
  spec.families = 1;
  spec.models_per_family = 3;
  spec.sigma = 0.02;
  spec.seed = 7;
  const auto models = generate_models(spec);
  // Members differ from the base by at most sigma per element.
  for (size_t m = 1; m < models.size(); ++m) {
    double max_diff = 0;
    for (size_t i = 0; i < 64; ++i) {
      max_diff = std::max(max_diff,
                          std::abs(static_cast<double>(models[m].tensors[0].data[i]) -
                                   static_cast<double>(models[0].tensors[0].data[i])));
    }
    CHECK(max_diff > 0);
    CHECK(max_diff <= spec.sigma + 1e-6);
  }
}

TEST_CASE("perturb fraction controls how many tensors move") {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kWeights;
  spec.shapes = {{32}, {32}, {32}, {32}, {32}, {32}, {32}, {32}};
  spec.families = 1;
  spec.models_per_family = 2;
  spec.perturb_fraction = 0.5;
  spec.seed = 8;
  const auto models = generate_models(spec);
  int moved = 0;
  for (size_t t = 0; t < 8; ++t) {
    if (models[1].tensors[t].data != models[0].tensors[t].data) ++moved;
  }
  CHECK(moved > 0);
  CHECK(moved < 8);
}

TEST_CASE("model files round trip through disk") {
  TempDir dir;
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {6, 10, 2};
  spec.seed = 9;
  const GeneratedModel gm = generate_models(spec)[0];
  write_model_files(gm, dir.path());

  const GeneratedModel back = read_model_files(dir / (gm.name + ".json"));
  CHECK(back.name == gm.name);
  REQUIRE(back.tensors.size() == gm.tensors.size());
  for (size_t t = 0; t < gm.tensors.size(); ++t) {
    CHECK(back.tensors[t].name == gm.tensors[t].name);
    CHECK(back.tensors[t].shape == gm.tensors[t].shape);
    CHECK(back.tensors[t].data == gm.tensors[t].data);
  }

  // Written files are byte-identical across runs.
  TempDir dir2;
  write_model_files(gm, dir2.path());
  CHECK(read_file_bytes(dir / (gm.name + ".tensors")) ==
        read_file_bytes(dir2 / (gm.name + ".tensors")));
  CHECK(read_file_bytes(dir / (gm.name + ".json")) ==
        read_file_bytes(dir2 / (gm.name + ".json")));
}

TEST_CASE("blob size mismatches are rejected") {
  TempDir dir;
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {4, 2};
  spec.seed = 10;
  const GeneratedModel gm = generate_models(spec)[0];
  write_model_files(gm, dir.path());
  // Truncate the blob.
  const auto blob_path = dir / (gm.name + ".tensors");
  std::vector<uint8_t> blob = read_file_bytes(blob_path);
  blob.pop_back();
  write_file_atomic(blob_path, blob);
  CHECK_THROWS_AS(read_model_files(dir / (gm.name + ".json")), InvalidTensor);
}

TEST_SUITE_END();
