#pragma once
// Content-addressed storage for serialized model architectures. Two models
// with identical architecture bytes share one stored copy.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace deltastore {

class ArchitectureStore {
 public:
  explicit ArchitectureStore(std::filesystem::path dir);

  // Stores the bytes and returns their content key. Re-putting identical
  // content returns the same key without writing. Distinct content that
  // collides on the hash gets a discriminated key, so equal keys always
  // mean equal bytes.
  std::string put(std::span<const uint8_t> content);

  // Throws NotFound for an unknown key.
  std::vector<uint8_t> get(const std::string& key) const;

  bool contains(const std::string& key) const;
  size_t stored_bytes() const;

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

}  // namespace deltastore
