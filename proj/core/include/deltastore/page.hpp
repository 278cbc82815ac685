#pragma once
// Tensor pages: immutable on-disk containers holding all delta records of
// one model behind a fixed offset header.
//
// Page layout (all integers little-endian):
//   magic "NSPG" | version u16 | record_count u32
//   table: (offset u64, length u64) per record, offsets from file start
//   records, contiguous and in model-architecture order
//
// Record layout:
//   name: u32 length + bytes
//   ndim u32 | dims u64 * ndim
//   base index_id u64 | base vertex_id u64   (all-ones pair = inline)
//   nbit u8 | scale f64 | delta_min f64
//   payload: u64 length + packed bits
//
// Inline records hold raw little-endian float32 bit patterns (nbit = 32)
// and reproduce their tensor exactly; they bypass the index entirely.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deltastore/quantizer.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

struct DeltaRecord {
  std::string name;
  std::vector<uint64_t> shape;
  BaseRef base;
  uint8_t nbit = 1;
  QuantParams params;
  std::vector<uint8_t> payload;

  bool is_inline() const { return base.is_none(); }
  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return n;
  }

  static DeltaRecord from_quantized(const std::string& name,
                                    const QuantizedDelta& qd);
  QuantizedDelta to_quantized() const;

  // Full-precision record for tensors too small to be worth indexing.
  static DeltaRecord make_inline(const Tensor& t);
  Tensor inline_tensor() const;
};

std::vector<uint8_t> serialize_record(const DeltaRecord& record);
DeltaRecord parse_record(std::span<const uint8_t> bytes);

// Metadata-only view of a record (everything before the payload); lets a
// staged loader count base-tensor shares without materializing payloads.
struct RecordPrefix {
  std::string name;
  std::vector<uint64_t> shape;
  BaseRef base;
  uint8_t nbit = 1;
};
RecordPrefix parse_record_prefix(std::span<const uint8_t> bytes);

// Serializes records into a page image.
std::vector<uint8_t> build_page(const std::vector<DeltaRecord>& records);

// Writes a page atomically and seals it read-only.
void write_page(const std::vector<DeltaRecord>& records,
                const std::filesystem::path& path);

class PageReader {
 public:
  // Reads and validates the whole file up front: magic, version, and a
  // strictly contiguous offset table covering the file exactly.
  explicit PageReader(const std::filesystem::path& path);
  explicit PageReader(std::vector<uint8_t> bytes);

  size_t record_count() const { return offsets_.size(); }
  DeltaRecord read_record(size_t i) const;
  std::vector<DeltaRecord> read_all() const;
  // Raw record window, for staged readers.
  std::span<const uint8_t> record_bytes(size_t i) const;
  size_t file_bytes() const { return bytes_.size(); }

 private:
  void validate();
  std::vector<uint8_t> bytes_;
  std::vector<std::pair<uint64_t, uint64_t>> offsets_;  // (offset, length)
};

}  // namespace deltastore
