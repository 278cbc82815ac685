#pragma once
// Hierarchical navigable small world graph over 8-bit quantized vertices.
//
// One index covers one pool key (element count). Distances are squared L2
// between a full-precision query and a vertex dequantized on the fly inside
// the kernel; no float copies of vertex payloads are ever cached.
//
// Not internally synchronized: callers serialize writers and may run any
// number of readers between writes (IndexPool enforces this).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deltastore/quantizer.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

// Squared L2 between a full-precision query and a vertex dequantized on
// the fly: the space every index in the pool searches.
double quantized_l2_distance(std::span<const double> query,
                             const QuantizedBase& vertex);

struct HnswConfig {
  uint32_t M = 16;                // max neighbors per vertex per layer
  uint32_t ef_construction = 200; // beam width while inserting
  // Beam width while querying. High-dimensional weight vectors concentrate
  // in distance, so recall@1 needs a wider beam than the usual 64: on
  // uniform 1024-d corpora of 5k vectors, 64 lands at ~0.7 recall while
  // 256 reaches ~0.99.
  uint32_t ef_search = 256;
};

class HnswIndex {
 public:
  explicit HnswIndex(uint64_t pool_key, HnswConfig config = {});

  uint64_t pool_key() const { return pool_key_; }
  const HnswConfig& config() const { return config_; }

  // Inserts a quantized vertex and returns its id. Ids are dense and never
  // reused. The vertex is immediately searchable.
  uint64_t insert(QuantizedBase qb);

  struct Hit {
    uint64_t vertex_id;
    double distance;  // squared L2
  };

  // Approximate nearest vertex to a full-precision query, or nullopt when
  // the index is empty. The query must have pool_key() elements.
  std::optional<Hit> search(std::span<const double> query) const;

  const QuantizedBase* find_vertex(uint64_t id) const;
  size_t size() const { return vertices_.size(); }

  // Serialized footprint of one vertex (codes, params, adjacency); used for
  // amortized index-cost accounting.
  size_t vertex_storage_bytes(uint64_t id) const;
  // Approximate in-memory footprint, used for cache budgeting.
  size_t resident_bytes() const;

  std::vector<uint8_t> serialize() const;
  static HnswIndex deserialize(std::span<const uint8_t> bytes);

 private:
  struct Vertex {
    QuantizedBase qb;
    int level = 0;
    // links[l] = neighbor ids at layer l, 0 <= l <= level
    std::vector<std::vector<uint64_t>> links;
  };

  double dist_to_query(std::span<const double> query, const Vertex& v) const;
  double dist_between(const Vertex& a, const Vertex& b) const;
  int random_level();
  uint64_t greedy_descend(std::span<const double> query, uint64_t entry,
                          int level) const;
  std::vector<Hit> search_layer(std::span<const double> query, uint64_t entry,
                                size_t ef, int level) const;
  // Heuristic neighbor selection: keeps a candidate only when it is closer
  // to the query than to every neighbor already kept. Candidate distances
  // are distances to the query, closest first.
  std::vector<uint64_t> select_neighbors(const std::vector<Hit>& candidates,
                                         size_t m) const;
  void prune_links(uint64_t id, int level, size_t cap);
  size_t level_cap(int level) const {
    return level == 0 ? 2 * static_cast<size_t>(config_.M)
                      : static_cast<size_t>(config_.M);
  }

  uint64_t pool_key_;
  HnswConfig config_;
  double level_factor_;  // 1 / ln(M)
  uint64_t rng_state_;
  uint64_t entry_point_ = BaseRef::kNone;
  int max_level_ = 0;
  std::vector<Vertex> vertices_;
};

}  // namespace deltastore
