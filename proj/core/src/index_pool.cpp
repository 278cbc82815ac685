#include "deltastore/index_pool.hpp"

#include <algorithm>

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"

namespace deltastore {

IndexPool::IndexPool(std::filesystem::path dir, IndexPoolConfig config)
    : dir_(std::move(dir)), config_(config) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path IndexPool::index_path(uint64_t pool_key) const {
  return dir_ / (std::to_string(pool_key) + ".nsix");
}

IndexPool::EntryPtr IndexPool::lookup(uint64_t pool_key, bool create) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(pool_key);
  if (it == entries_.end()) {
    if (!create && !std::filesystem::exists(index_path(pool_key))) {
      return nullptr;
    }
    it = entries_.emplace(pool_key, std::make_shared<Entry>(pool_key)).first;
  }
  // Touch the LRU.
  auto pos = lru_pos_.find(pool_key);
  if (pos != lru_pos_.end()) lru_.erase(pos->second);
  lru_.push_front(pool_key);
  lru_pos_[pool_key] = lru_.begin();
  return it->second;
}

void IndexPool::ensure_loaded(Entry& entry) const {
  if (entry.index) return;
  const std::filesystem::path path = index_path(entry.pool_key);
  if (std::filesystem::exists(path)) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    auto idx = std::make_shared<HnswIndex>(HnswIndex::deserialize(bytes));
    if (idx->pool_key() != entry.pool_key) {
      throw CorruptStore("index file pool key mismatch: " + path.string());
    }
    entry.index = std::move(idx);
  } else {
    entry.index = std::make_shared<HnswIndex>(entry.pool_key, config_.hnsw);
  }
}

void IndexPool::persist(Entry& entry) const {
  if (!entry.index || !entry.dirty) return;
  const std::vector<uint8_t> bytes = entry.index->serialize();
  write_file_atomic(index_path(entry.pool_key), bytes);
  entry.dirty = false;
}

void IndexPool::rebalance(const EntryPtr& touched, size_t touched_bytes) {
  std::vector<EntryPtr> victims;
  {
    std::lock_guard<std::mutex> lock(mu_);
    total_bytes_ -= accounted_bytes_[touched->pool_key];
    accounted_bytes_[touched->pool_key] = touched_bytes;
    total_bytes_ += touched_bytes;
    // Evict from the cold end until the cache fits, including the touched
    // entry itself when it alone exceeds the budget.
    for (auto it = lru_.rbegin();
         it != lru_.rend() && total_bytes_ > config_.cache_budget_bytes;
         ++it) {
      if (accounted_bytes_[*it] == 0) continue;
      victims.push_back(entries_.at(*it));
      total_bytes_ -= accounted_bytes_[*it];
      accounted_bytes_[*it] = 0;
    }
  }
  for (const EntryPtr& victim : victims) {
    std::unique_lock<std::shared_mutex> guard(victim->rw);
    persist(*victim);
    victim->index.reset();
  }
}

std::optional<SearchHit> IndexPool::search_nearest(const Tensor& query) {
  const uint64_t pool_key = query.elem_count();
  EntryPtr entry = lookup(pool_key, /*create=*/false);
  if (!entry) return std::nullopt;

  std::vector<double> q(query.data.begin(), query.data.end());
  std::optional<HnswIndex::Hit> hit;
  size_t bytes = 0;
  {
    std::shared_lock<std::shared_mutex> guard(entry->rw);
    if (entry->index) {
      hit = entry->index->search(q);
      bytes = entry->index->resident_bytes();
    } else {
      guard.unlock();
      std::unique_lock<std::shared_mutex> xguard(entry->rw);
      ensure_loaded(*entry);
      hit = entry->index->search(q);
      bytes = entry->index->resident_bytes();
    }
  }
  rebalance(entry, bytes);
  if (!hit) return std::nullopt;
  return SearchHit{BaseRef{pool_key, hit->vertex_id}, hit->distance};
}

BaseRef IndexPool::insert_base(const QuantizedBase& qb) {
  const uint64_t pool_key = qb.elem_count();
  EntryPtr entry = lookup(pool_key, /*create=*/true);
  uint64_t vertex_id;
  size_t bytes = 0;
  {
    std::unique_lock<std::shared_mutex> guard(entry->rw);
    ensure_loaded(*entry);
    vertex_id = entry->index->insert(qb);
    entry->dirty = true;
    bytes = entry->index->resident_bytes();
  }
  rebalance(entry, bytes);
  return BaseRef{pool_key, vertex_id};
}

QuantizedBase IndexPool::get_vertex(const BaseRef& ref) {
  EntryPtr entry = lookup(ref.index_id, /*create=*/false);
  if (!entry) {
    throw CorruptStore("dangling base reference: no index for pool key " +
                       std::to_string(ref.index_id));
  }
  QuantizedBase out;
  size_t bytes = 0;
  {
    std::unique_lock<std::shared_mutex> guard(entry->rw);
    ensure_loaded(*entry);
    const QuantizedBase* qb = entry->index->find_vertex(ref.vertex_id);
    if (!qb) {
      throw CorruptStore("dangling base reference: vertex " +
                         std::to_string(ref.vertex_id) + " not in pool " +
                         std::to_string(ref.index_id));
    }
    out = *qb;
    bytes = entry->index->resident_bytes();
  }
  rebalance(entry, bytes);
  return out;
}

void IndexPool::flush() {
  std::vector<EntryPtr> all;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& [key, entry] : entries_) all.push_back(entry);
  }
  for (const EntryPtr& entry : all) {
    std::unique_lock<std::shared_mutex> guard(entry->rw);
    persist(*entry);
  }
}

void IndexPool::with_index(uint64_t pool_key,
                           const std::function<void(const HnswIndex&)>& fn) {
  EntryPtr entry = lookup(pool_key, /*create=*/false);
  if (!entry) {
    throw NotFound("no index for pool key " + std::to_string(pool_key));
  }
  size_t bytes = 0;
  {
    std::unique_lock<std::shared_mutex> guard(entry->rw);
    ensure_loaded(*entry);
    fn(*entry->index);
    bytes = entry->index->resident_bytes();
  }
  rebalance(entry, bytes);
}

std::vector<uint64_t> IndexPool::pool_keys() const {
  std::vector<uint64_t> keys;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& [key, entry] : entries_) keys.push_back(key);
  }
  if (std::filesystem::exists(dir_)) {
    for (const auto& de : std::filesystem::directory_iterator(dir_)) {
      if (de.path().extension() != ".nsix") continue;
      try {
        keys.push_back(std::stoull(de.path().stem().string()));
      } catch (const std::exception&) {
        throw CorruptStore("unexpected index file name: " +
                           de.path().string());
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

bool IndexPool::is_resident(uint64_t pool_key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(pool_key);
  return it != entries_.end() && it->second->index != nullptr;
}

size_t IndexPool::resident_bytes() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_bytes_;
}

}  // namespace deltastore
