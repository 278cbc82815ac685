#include "deltastore/arch_store.hpp"

#include <cstdio>

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"

namespace deltastore {

namespace {

std::string fnv1a_hex(std::span<const uint8_t> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

ArchitectureStore::ArchitectureStore(std::filesystem::path dir)
    : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ArchitectureStore::path_for(const std::string& key) const {
  return dir_ / (key + ".arch");
}

std::string ArchitectureStore::put(std::span<const uint8_t> content) {
  std::string key =
      fnv1a_hex(content) + "-" + std::to_string(content.size());
  for (int suffix = 0;; ++suffix) {
    const std::string candidate =
        suffix == 0 ? key : key + "-" + std::to_string(suffix);
    const std::filesystem::path path = path_for(candidate);
    if (!std::filesystem::exists(path)) {
      write_file_atomic(path, content);
      return candidate;
    }
    const std::vector<uint8_t> existing = read_file_bytes(path);
    if (existing.size() == content.size() &&
        std::equal(existing.begin(), existing.end(), content.begin())) {
      return candidate;  // identical content already stored
    }
    // Hash collision with different content; try a discriminated key.
  }
}

std::vector<uint8_t> ArchitectureStore::get(const std::string& key) const {
  const std::filesystem::path path = path_for(key);
  if (!std::filesystem::exists(path)) {
    throw NotFound("architecture key not found: " + key);
  }
  return read_file_bytes(path);
}

bool ArchitectureStore::contains(const std::string& key) const {
  return std::filesystem::exists(path_for(key));
}

size_t ArchitectureStore::stored_bytes() const {
  size_t total = 0;
  if (!std::filesystem::exists(dir_)) return 0;
  for (const auto& de : std::filesystem::directory_iterator(dir_)) {
    if (de.path().extension() == ".arch") {
      total += static_cast<size_t>(std::filesystem::file_size(de.path()));
    }
  }
  return total;
}

}  // namespace deltastore
