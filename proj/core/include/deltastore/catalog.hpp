#pragma once
// Model catalog: maps model ids and names to pages, architectures, and the
// tolerance each model was saved with. Persisted as an append-only JSONL
// document; a catalog entry is the commit point of a save.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace deltastore {

struct CatalogEntry {
  uint64_t model_id = 0;
  std::string name;
  std::string page_path;  // relative to the store root
  std::string arch_key;
  double tolerance = 0.0;
  std::string created;  // ISO-8601 UTC
};

class ModelCatalog {
 public:
  explicit ModelCatalog(std::filesystem::path path);

  // Assigns the next model id, appends the entry, and returns it.
  // Throws DuplicateName when the name is taken.
  CatalogEntry put(const std::string& name, const std::string& page_path,
                   const std::string& arch_key, double tolerance);

  CatalogEntry get(const std::string& name) const;   // NotFound
  CatalogEntry get(uint64_t model_id) const;         // NotFound
  std::optional<CatalogEntry> find(const std::string& name) const;

  // Snapshot of the entries in insertion order. Writes are serialized;
  // readers see committed entries only.
  std::vector<CatalogEntry> list() const;
  size_t size() const;

 private:
  std::optional<CatalogEntry> find_locked(const std::string& name) const;

  mutable std::mutex mu_;
  std::filesystem::path path_;
  std::vector<CatalogEntry> entries_;
  uint64_t next_id_ = 1;
};

}  // namespace deltastore
