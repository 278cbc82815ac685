#pragma once
// Pool of per-shape HNSW indexes keyed by element count, backed by one
// file per index and fronted by a byte-budgeted LRU cache of deserialized
// indexes.
//
// Concurrency: searches on one index run in parallel (shared lock); an
// insert takes that index's exclusive lock and blocks only operations on
// the same index. Pool bookkeeping (map, LRU, byte accounting) is guarded
// by a single short-lived mutex.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>

#include "deltastore/hnsw.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

struct IndexPoolConfig {
  size_t cache_budget_bytes = 256ull << 20;  // 256 MiB
  HnswConfig hnsw;
};

struct SearchHit {
  BaseRef ref;
  double distance;  // squared L2 in the quantized space
};

class IndexPool {
 public:
  IndexPool(std::filesystem::path dir, IndexPoolConfig config = {});

  // Approximate nearest vertex for a flattened query, or nullopt when no
  // index exists for its element count.
  std::optional<SearchHit> search_nearest(const Tensor& query);

  // Inserts a vertex, creating the per-shape index on first use. The
  // returned reference is stable across cache eviction and reload.
  BaseRef insert_base(const QuantizedBase& qb);

  // Fetches a vertex payload and promotes its index in the LRU. A dangling
  // reference raises CorruptStore.
  QuantizedBase get_vertex(const BaseRef& ref);

  // Persists every dirty resident index.
  void flush();

  // Runs `fn` under the index's shared lock. Throws NotFound when no index
  // exists for the key.
  void with_index(uint64_t pool_key,
                  const std::function<void(const HnswIndex&)>& fn);

  std::vector<uint64_t> pool_keys() const;
  bool is_resident(uint64_t pool_key) const;
  size_t resident_bytes() const;
  const std::filesystem::path& dir() const { return dir_; }
  const IndexPoolConfig& config() const { return config_; }

 private:
  struct Entry {
    explicit Entry(uint64_t key) : pool_key(key) {}
    const uint64_t pool_key;
    std::shared_mutex rw;
    std::shared_ptr<HnswIndex> index;  // null when not resident
    bool dirty = false;
  };
  using EntryPtr = std::shared_ptr<Entry>;

  std::filesystem::path index_path(uint64_t pool_key) const;
  // Returns the entry for a key, creating it when `create` is set or a
  // file exists on disk; nullptr otherwise. Touches the LRU.
  EntryPtr lookup(uint64_t pool_key, bool create);
  // Loads the index from disk if not resident. Caller holds entry.rw
  // exclusively.
  void ensure_loaded(Entry& entry) const;
  void persist(Entry& entry) const;  // caller holds entry.rw
  // Re-account an entry's bytes and evict least-recently-used indexes
  // until the cache fits the budget again. `touched_bytes` is measured by
  // the caller while it still holds the entry lock.
  void rebalance(const EntryPtr& touched, size_t touched_bytes);

  std::filesystem::path dir_;
  IndexPoolConfig config_;

  mutable std::mutex mu_;
  std::map<uint64_t, EntryPtr> entries_;
  std::list<uint64_t> lru_;  // most recently used first
  std::map<uint64_t, std::list<uint64_t>::iterator> lru_pos_;
  std::map<uint64_t, size_t> accounted_bytes_;
  size_t total_bytes_ = 0;
};

}  // namespace deltastore
