#include "deltastore/store.hpp"

namespace deltastore {

Store::Store(const std::filesystem::path& root, StoreConfig config)
    : root_(root) {
  std::filesystem::create_directories(root_);
  std::filesystem::create_directories(pages_dir());
  catalog_ = std::make_unique<ModelCatalog>(root_ / "catalog.jsonl");
  arch_ = std::make_unique<ArchitectureStore>(root_ / "arch");
  pool_ = std::make_unique<IndexPool>(root_ / "index", config.index);
}

size_t Store::index_file_bytes() {
  pool_->flush();
  size_t total = 0;
  const std::filesystem::path dir = root_ / "index";
  if (!std::filesystem::exists(dir)) return 0;
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    if (de.path().extension() == ".nsix") {
      total += static_cast<size_t>(std::filesystem::file_size(de.path()));
    }
  }
  return total;
}

}  // namespace deltastore
