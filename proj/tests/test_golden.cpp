// Format-stability tests: committed golden files pin the page, index, and
// graph-document layouts bit for bit. Regenerate with
//   DELTASTORE_WRITE_GOLDEN=1 ./golden_tests
// only when the format version is deliberately bumped.

#include <cstdlib>
#include <filesystem>

#include "deltastore/corpus.hpp"
#include "deltastore/hnsw.hpp"
#include "deltastore/io.hpp"
#include "deltastore/model_graph.hpp"
#include "deltastore/page.hpp"
#include "doctest.h"

using namespace deltastore;

namespace {

const std::filesystem::path kGoldenDir = DELTASTORE_GOLDEN_DIR;

std::vector<DeltaRecord> golden_records() {
  std::vector<DeltaRecord> records;

  DeltaRecord a;
  a.name = "w1";
  a.shape = {2, 3};
  a.base = BaseRef{6, 0};
  a.nbit = 5;
  a.params = {0x1p-23, -0.25};
  a.payload = pack_bits(std::vector<uint32_t>{1, 2, 3, 4, 5, 6}, 5);
  records.push_back(a);

  Tensor tiny;
  tiny.name = "tiny";
  tiny.shape = {1, 2};
  tiny.data = {1.5f, -0.25f};
  records.push_back(DeltaRecord::make_inline(tiny));

  DeltaRecord c;
  c.name = "w2";
  c.shape = {4};
  c.base = BaseRef{4, 1};
  c.nbit = 12;
  c.params = {0x1p-23, 0.5};
  c.payload = pack_bits(std::vector<uint32_t>{0xABC, 0xDEF, 0x123, 0x456}, 12);
  records.push_back(c);

  return records;
}

std::vector<uint8_t> golden_index_bytes() {
  HnswIndex index(8);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Tensor t;
    t.name = "v" + std::to_string(seed);
    t.shape = {8};
    Rng rng(7000 + seed);
    t.data.resize(8);
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    index.insert(quantize_base(t));
  }
  return index.serialize();
}

std::string golden_graph_doc() {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {4, 8, 2};
  spec.seed = 11;
  ModelGraph g = generate_models(spec)[0].graph;
  g.blob = "m0_0.tensors";
  return serialize_graph_doc(g);
}

void write_if_requested() {
  if (std::getenv("DELTASTORE_WRITE_GOLDEN") == nullptr) return;
  std::filesystem::create_directories(kGoldenDir);
  write_file_atomic(kGoldenDir / "sample.page", build_page(golden_records()));
  write_file_atomic(kGoldenDir / "sample.nsix", golden_index_bytes());
  const std::string doc = golden_graph_doc();
  write_file_atomic(kGoldenDir / "sample_graph.json",
                    std::span<const uint8_t>(
                        reinterpret_cast<const uint8_t*>(doc.data()),
                        doc.size()));
}

}  // namespace

TEST_SUITE_BEGIN("golden");

TEST_CASE("page bytes match the committed golden file") {
  write_if_requested();
  const std::vector<uint8_t> expected =
      read_file_bytes(kGoldenDir / "sample.page");
  CHECK(build_page(golden_records()) == expected);

  // And the committed file parses back to the same records.
  PageReader reader(kGoldenDir / "sample.page");
  REQUIRE(reader.record_count() == 3);
  const std::vector<DeltaRecord> records = golden_records();
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(serialize_record(reader.read_record(i)) ==
          serialize_record(records[i]));
  }
  CHECK(unpack_bits(reader.read_record(0).payload, 6, 5) ==
        std::vector<uint32_t>{1, 2, 3, 4, 5, 6});
  CHECK(reader.read_record(1).inline_tensor().data ==
        std::vector<float>{1.5f, -0.25f});
}

TEST_CASE("index bytes match the committed golden file") {
  const std::vector<uint8_t> expected =
      read_file_bytes(kGoldenDir / "sample.nsix");
  CHECK(golden_index_bytes() == expected);

  const HnswIndex index = HnswIndex::deserialize(expected);
  CHECK(index.size() == 5);
  CHECK(index.pool_key() == 8);
  CHECK(index.serialize() == expected);
}

TEST_CASE("graph document matches the committed golden file") {
  const std::vector<uint8_t> expected =
      read_file_bytes(kGoldenDir / "sample_graph.json");
  CHECK(golden_graph_doc() ==
        std::string(expected.begin(), expected.end()));
  const ModelGraph parsed =
      parse_graph_doc(std::string(expected.begin(), expected.end()));
  CHECK(parsed.initializers.size() == 4);
  CHECK(serialize_graph_doc(parsed) == golden_graph_doc());
}

TEST_CASE("10^4 single-byte header corruptions never crash") {
  const std::vector<uint8_t> page = read_file_bytes(kGoldenDir / "sample.page");
  const std::vector<uint8_t> index = read_file_bytes(kGoldenDir / "sample.nsix");
  // Page header: magic, version, count, offset table. The index format is
  // checksummed, so any byte of the file is fair game there.
  const size_t page_header = 4 + 2 + 4 + 16 * 3;
  const size_t index_header = index.size();

  Rng rng(20260811);
  int page_trials = 0, index_trials = 0, version_trials = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const bool pick_page = rng.unit() < 0.5;
    const std::vector<uint8_t>& good = pick_page ? page : index;
    const size_t header = pick_page ? page_header : index_header;
    std::vector<uint8_t> bad = good;
    const size_t pos = rng.next_u64() % header;
    const uint8_t flip = static_cast<uint8_t>(1 + rng.next_u64() % 255);
    bad[pos] = static_cast<uint8_t>(bad[pos] ^ flip);
    const bool version_byte = pos == 4 || pos == 5;
    version_trials += version_byte ? 1 : 0;
    try {
      if (pick_page) {
        PageReader reader(std::move(bad));
        ++page_trials;  // only reachable if corruption went unnoticed
      } else {
        HnswIndex::deserialize(bad);
        ++index_trials;
      }
      // Reaching here means a header flip validated; that must not happen.
      CHECK(false);
    } catch (const CorruptStore&) {
      CHECK_FALSE(version_byte);
    } catch (const UnsupportedVersion&) {
      CHECK(version_byte);
    }
    // Any other exception type escapes and fails the test.
  }
  CHECK(version_trials > 0);
  CHECK(page_trials == 0);
  CHECK(index_trials == 0);
}

TEST_CASE("truncated golden files are rejected") {
  const std::vector<uint8_t> page = read_file_bytes(kGoldenDir / "sample.page");
  const std::vector<uint8_t> index = read_file_bytes(kGoldenDir / "sample.nsix");
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t keep_page = rng.next_u64() % page.size();
    CHECK_THROWS_AS(
        PageReader(std::vector<uint8_t>(page.begin(), page.begin() + keep_page)),
        Error);
    const size_t keep_index = rng.next_u64() % index.size();
    const std::vector<uint8_t> cut(index.begin(), index.begin() + keep_index);
    CHECK_THROWS_AS(HnswIndex::deserialize(cut), Error);
  }
}

TEST_SUITE_END();
