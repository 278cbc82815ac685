#pragma once
// A store directory bundles the model catalog, the architecture store, the
// per-shape index pool, and the tensor pages of every saved model.
//
// Layout under the store root:
//   catalog.jsonl      model catalog, append-only
//   arch/              content-addressed architecture documents
//   index/<key>.nsix   one HNSW index per element count
//   pages/<model>.page one sealed tensor page per model

#include <filesystem>
#include <memory>

#include "deltastore/arch_store.hpp"
#include "deltastore/catalog.hpp"
#include "deltastore/index_pool.hpp"

namespace deltastore {

struct StoreConfig {
  IndexPoolConfig index;
};

class Store {
 public:
  // Opens an existing store or initializes an empty one.
  explicit Store(const std::filesystem::path& root, StoreConfig config = {});

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  ModelCatalog& catalog() { return *catalog_; }
  const ModelCatalog& catalog() const { return *catalog_; }
  ArchitectureStore& arch() { return *arch_; }
  IndexPool& pool() { return *pool_; }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path pages_dir() const { return root_ / "pages"; }
  std::filesystem::path resolve(const std::string& rel) const {
    return root_ / rel;
  }

  // Total bytes of persisted index files (dirty indexes are flushed first).
  size_t index_file_bytes();

 private:
  std::filesystem::path root_;
  std::unique_ptr<ModelCatalog> catalog_;
  std::unique_ptr<ArchitectureStore> arch_;
  std::unique_ptr<IndexPool> pool_;
};

}  // namespace deltastore
