#include "deltastore/hnsw.hpp"

#include <algorithm>
#include <cmath>

#include "deltastore/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace deltastore;

namespace {

// Exact nearest neighbor over the same quantized space the index searches.
uint64_t brute_force_nearest(const HnswIndex& index,
                             const std::vector<double>& query) {
  uint64_t best_id = 0;
  double best = std::numeric_limits<double>::infinity();
  for (uint64_t id = 0; id < index.size(); ++id) {
    const std::vector<double> v = dequantize_base_f64(*index.find_vertex(id));
    double d = 0;
    for (size_t i = 0; i < query.size(); ++i) {
      const double diff = query[i] - v[i];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      best_id = id;
    }
  }
  return best_id;
}

}  // namespace

TEST_SUITE_BEGIN("hnsw");

TEST_CASE("empty index returns no hit") {
  HnswIndex index(16);
  const std::vector<double> q(16, 0.0);
  CHECK_FALSE(index.search(q).has_value());
}

TEST_CASE("self retrieval at distance zero") {
  HnswIndex index(64);
  std::vector<uint64_t> ids;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    ids.push_back(
        index.insert(quantize_base(testing::random_tensor("t", {64}, seed))));
  }
  for (uint64_t id : ids) {
    const std::vector<double> q = dequantize_base_f64(*index.find_vertex(id));
    const auto hit = index.search(q);
    REQUIRE(hit.has_value());
    CHECK(hit->vertex_id == id);
    CHECK(hit->distance == 0.0);
  }
}

TEST_CASE("insert-then-search stays under the quantization noise floor") {
  HnswIndex index(256);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor t = testing::random_tensor("t", {256}, 50 + seed);
    const QuantizedBase qb = quantize_base(t);
    const uint64_t id = index.insert(qb);
    std::vector<double> q(t.data.begin(), t.data.end());
    const auto hit = index.search(q);
    REQUIRE(hit.has_value());
    CHECK(hit->vertex_id == id);
    const double bound = 256.0 * (qb.params.scale / 2) * (qb.params.scale / 2);
    CHECK(hit->distance <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("identical tensors get distinct vertex ids") {
  HnswIndex index(32);
  const Tensor t = testing::random_tensor("t", {32}, 3);
  const uint64_t a = index.insert(quantize_base(t));
  const uint64_t b = index.insert(quantize_base(t));
  CHECK(a != b);
  CHECK(index.size() == 2);
}

TEST_CASE("recall@1 against brute force on 100 vectors") {
  HnswIndex index(48);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    index.insert(quantize_base(testing::random_tensor("t", {48}, 200 + seed)));
  }
  int hits = 0;
  for (uint64_t q = 0; q < 20; ++q) {
    const Tensor probe = testing::random_tensor("q", {48}, 700 + q);
    const std::vector<double> query(probe.data.begin(), probe.data.end());
    const auto hit = index.search(query);
    REQUIRE(hit.has_value());
    if (hit->vertex_id == brute_force_nearest(index, query)) ++hits;
  }
  CHECK(hits >= 18);  // recall@1 >= 0.9
}

TEST_CASE("inserted points find themselves after many inserts") {
  HnswIndex index(24);
  std::vector<Tensor> tensors;
  for (uint64_t seed = 0; seed < 60; ++seed) {
    tensors.push_back(testing::random_tensor("t", {24}, 300 + seed));
    index.insert(quantize_base(tensors.back()));
  }
  int agree = 0;
  for (uint64_t id = 0; id < index.size(); ++id) {
    const std::vector<double> q = dequantize_base_f64(*index.find_vertex(id));
    const auto hit = index.search(q);
    REQUIRE(hit.has_value());
    if (hit->vertex_id == brute_force_nearest(index, q)) ++agree;
  }
  CHECK(agree >= 54);
}

TEST_CASE("serialize/deserialize round trip preserves search behavior") {
  HnswIndex index(16);
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    index.insert(quantize_base(testing::random_tensor("t", {16}, 400 + seed)));
  }
  const std::vector<uint8_t> bytes = index.serialize();
  const HnswIndex restored = HnswIndex::deserialize(bytes);
  CHECK(restored.size() == index.size());
  CHECK(restored.serialize() == bytes);  // stable bytes
  for (uint64_t q = 0; q < 10; ++q) {
    const Tensor probe = testing::random_tensor("q", {16}, 900 + q);
    const std::vector<double> query(probe.data.begin(), probe.data.end());
    const auto a = index.search(query);
    const auto b = restored.search(query);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->vertex_id == b->vertex_id);
    CHECK(a->distance == b->distance);
  }
  // Vertex payloads identical bitwise.
  for (uint64_t id = 0; id < index.size(); ++id) {
    CHECK(index.find_vertex(id)->codes == restored.find_vertex(id)->codes);
  }
}

TEST_CASE("empty index round trip") {
  HnswIndex index(8);
  const HnswIndex restored = HnswIndex::deserialize(index.serialize());
  CHECK(restored.size() == 0);
  CHECK(restored.pool_key() == 8);
}

TEST_CASE("quantized-L2 space is symmetric and non-negative") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const QuantizedBase a =
        quantize_base(testing::random_tensor("a", {128}, 1000 + seed));
    const QuantizedBase b =
        quantize_base(testing::random_tensor("b", {128}, 2000 + seed, -3.0, 2.0));
    const std::vector<double> da = dequantize_base_f64(a);
    const std::vector<double> db = dequantize_base_f64(b);
    const double ab = quantized_l2_distance(da, b);
    const double ba = quantized_l2_distance(db, a);
    CHECK(ab >= 0.0);
    CHECK(ab == ba);  // same per-element squares, summed in the same order
    CHECK(quantized_l2_distance(da, a) == 0.0);
  }
}

TEST_CASE("header corruption is detected, never a crash") {
  HnswIndex index(16);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    index.insert(quantize_base(testing::random_tensor("t", {16}, seed)));
  }
  const std::vector<uint8_t> good = index.serialize();
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<uint8_t> bad = good;
    const size_t pos = rng.next_u64() % std::min<size_t>(good.size(), 64);
    const uint8_t flip = static_cast<uint8_t>(1 + rng.next_u64() % 255);
    bad[pos] = static_cast<uint8_t>(bad[pos] ^ flip);
    try {
      const HnswIndex parsed = HnswIndex::deserialize(bad);
      // A surviving parse must at least be self-consistent.
      (void)parsed.size();
    } catch (const CorruptStore&) {
    } catch (const UnsupportedVersion&) {
    }
  }
}

TEST_SUITE_END();
