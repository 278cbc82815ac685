#pragma once
// Little-endian byte buffer encode/decode plus small file helpers.
// All multi-byte integers in deltastore file formats are little-endian;
// doubles are encoded as the little-endian bytes of their IEEE-754 bit
// pattern.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deltastore/errors.hpp"

namespace deltastore {

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { append_le(v); }
  void u32(uint32_t v) { append_le(v); }
  void u64(uint64_t v) { append_le(v); }
  void f64(double v);
  void bytes(std::span<const uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
  }
  void str(const std::string& s);  // u32 length + raw bytes

  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  template <typename T>
  void append_le(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
  }
  std::vector<uint8_t> buf_;
};

// Bounded reader: every accessor checks the remaining window and throws
// CorruptStore instead of reading past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  double f64();
  std::vector<uint8_t> bytes(size_t n);
  std::string str(size_t max_len = 1 << 20);

  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) const {
    if (remaining() < n) throw CorruptStore("unexpected end of data");
  }
  template <typename T>
  T read_le() {
    need(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);

// Writes through a temporary file and renames into place, so a crash never
// leaves a partially written file at `path`. When `read_only` is set the
// final file has its write bits cleared (sealed pages).
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const uint8_t> data, bool read_only = false);

}  // namespace deltastore
