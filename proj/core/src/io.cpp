#include "deltastore/io.hpp"

#include <atomic>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <fstream>
#include <system_error>

#include <sys/stat.h>
#include <unistd.h>

namespace deltastore {

void ByteWriter::f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

void ByteWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  bytes(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

uint8_t ByteReader::u8() { return read_le<uint8_t>(); }
uint16_t ByteReader::u16() { return read_le<uint16_t>(); }
uint32_t ByteReader::u32() { return read_le<uint32_t>(); }
uint64_t ByteReader::u64() { return read_le<uint64_t>(); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<uint8_t> ByteReader::bytes(size_t n) {
  need(n);
  std::vector<uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
  pos_ += n;
  return out;
}

std::string ByteReader::str(size_t max_len) {
  uint32_t len = u32();
  if (len > max_len) throw CorruptStore("string length out of range");
  need(len);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
  pos_ += len;
  return s;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  in.seekg(0, std::ios::end);
  std::streamoff size = in.tellg();
  if (size < 0) throw IoError("cannot stat file: " + path.string());
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0 &&
      !in.read(reinterpret_cast<char*>(buf.data()), size)) {
    throw IoError("short read: " + path.string());
  }
  return buf;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const uint8_t> data, bool read_only) {
  static std::atomic<uint64_t> counter{0};
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create file: " + tmp.string());
    if (!data.empty() &&
        !out.write(reinterpret_cast<const char*>(data.data()),
                   static_cast<std::streamsize>(data.size()))) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("short write: " + tmp.string());
    }
  }
  // A previously sealed file at `path` is read-only; drop it first so the
  // rename cannot fail on permissions.
  if (std::filesystem::exists(path)) {
    ::chmod(path.c_str(), 0644);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("rename failed for " + path.string());
  }
  if (read_only) {
    if (::chmod(path.c_str(), 0444) != 0) {
      throw IoError("chmod failed for " + path.string());
    }
  }
}

}  // namespace deltastore
