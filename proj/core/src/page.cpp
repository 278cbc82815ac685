#include "deltastore/page.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"

namespace deltastore {

namespace {
constexpr char kMagic[4] = {'N', 'S', 'P', 'G'};
constexpr uint16_t kVersion = 1;
constexpr size_t kFixedHeader = 4 + 2 + 4;
}  // namespace

DeltaRecord DeltaRecord::from_quantized(const std::string& name,
                                        const QuantizedDelta& qd) {
  DeltaRecord r;
  r.name = name;
  r.shape = qd.original_shape;
  r.base = qd.base;
  r.nbit = static_cast<uint8_t>(qd.nbit);
  r.params = qd.params;
  r.payload = qd.payload;
  if (r.elem_count() != qd.elem_count) {
    throw ShapeMismatch("record shape does not cover the quantized payload");
  }
  return r;
}

QuantizedDelta DeltaRecord::to_quantized() const {
  QuantizedDelta qd;
  qd.payload = payload;
  qd.nbit = nbit;
  qd.params = params;
  qd.base = base;
  qd.elem_count = elem_count();
  qd.original_shape = shape;
  return qd;
}

DeltaRecord DeltaRecord::make_inline(const Tensor& t) {
  DeltaRecord r;
  r.name = t.name;
  r.shape = t.shape;
  r.base = BaseRef::none();
  r.nbit = 32;
  r.params = QuantParams{1.0, 0.0};
  r.payload.resize(t.data.size() * 4);
  for (size_t i = 0; i < t.data.size(); ++i) {
    const uint32_t bits = std::bit_cast<uint32_t>(t.data[i]);
    r.payload[4 * i + 0] = static_cast<uint8_t>(bits);
    r.payload[4 * i + 1] = static_cast<uint8_t>(bits >> 8);
    r.payload[4 * i + 2] = static_cast<uint8_t>(bits >> 16);
    r.payload[4 * i + 3] = static_cast<uint8_t>(bits >> 24);
  }
  return r;
}

Tensor DeltaRecord::inline_tensor() const {
  if (!is_inline()) throw CorruptStore("record is not inline");
  Tensor t;
  t.name = name;
  t.shape = shape;
  const uint64_t n = elem_count();
  if (payload.size() != n * 4) {
    throw CorruptStore("inline payload length mismatch for '" + name + "'");
  }
  t.data.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t bits = static_cast<uint32_t>(payload[4 * i]) |
                    (static_cast<uint32_t>(payload[4 * i + 1]) << 8) |
                    (static_cast<uint32_t>(payload[4 * i + 2]) << 16) |
                    (static_cast<uint32_t>(payload[4 * i + 3]) << 24);
    t.data[i] = std::bit_cast<float>(bits);
  }
  return t;
}

std::vector<uint8_t> serialize_record(const DeltaRecord& record) {
  ByteWriter w;
  w.str(record.name);
  w.u32(static_cast<uint32_t>(record.shape.size()));
  for (uint64_t d : record.shape) w.u64(d);
  w.u64(record.base.index_id);
  w.u64(record.base.vertex_id);
  w.u8(record.nbit);
  w.f64(record.params.scale);
  w.f64(record.params.delta_min);
  w.u64(record.payload.size());
  w.bytes(record.payload);
  return w.take();
}

DeltaRecord parse_record(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  DeltaRecord rec;
  rec.name = r.str();
  const uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 64) throw CorruptStore("record rank out of range");
  rec.shape.resize(ndim);
  uint64_t elems = 1;
  for (uint64_t& d : rec.shape) {
    d = r.u64();
    if (d == 0 || elems > (uint64_t(1) << 40) / d) {
      throw CorruptStore("record dimensions out of range");
    }
    elems *= d;
  }
  rec.base.index_id = r.u64();
  rec.base.vertex_id = r.u64();
  if ((rec.base.index_id == BaseRef::kNone) !=
      (rec.base.vertex_id == BaseRef::kNone)) {
    throw CorruptStore("half-set base reference");
  }
  rec.nbit = r.u8();
  if (rec.nbit < 1 || rec.nbit > 32) throw CorruptStore("record nbit out of range");
  rec.params.scale = r.f64();
  rec.params.delta_min = r.f64();
  if (!(rec.params.scale > 0.0) || !std::isfinite(rec.params.scale) ||
      !std::isfinite(rec.params.delta_min)) {
    throw CorruptStore("record quantization params out of range");
  }
  const uint64_t payload_len = r.u64();
  const uint64_t expect = (elems * rec.nbit + 7) / 8;
  if (payload_len != expect) {
    throw CorruptStore("record payload length mismatch for '" + rec.name + "'");
  }
  rec.payload = r.bytes(payload_len);
  if (!r.exhausted()) throw CorruptStore("trailing bytes in record");
  return rec;
}

RecordPrefix parse_record_prefix(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  RecordPrefix p;
  p.name = r.str();
  const uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 64) throw CorruptStore("record rank out of range");
  p.shape.resize(ndim);
  for (uint64_t& d : p.shape) d = r.u64();
  p.base.index_id = r.u64();
  p.base.vertex_id = r.u64();
  p.nbit = r.u8();
  return p;
}

std::vector<uint8_t> build_page(const std::vector<DeltaRecord>& records) {
  std::vector<std::vector<uint8_t>> blobs;
  blobs.reserve(records.size());
  for (const DeltaRecord& rec : records) blobs.push_back(serialize_record(rec));

  ByteWriter w;
  w.bytes(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(kMagic), sizeof(kMagic)));
  w.u16(kVersion);
  w.u32(static_cast<uint32_t>(records.size()));
  uint64_t offset = kFixedHeader + 16 * records.size();
  for (const auto& blob : blobs) {
    w.u64(offset);
    w.u64(blob.size());
    offset += blob.size();
  }
  for (const auto& blob : blobs) w.bytes(blob);
  return w.take();
}

void write_page(const std::vector<DeltaRecord>& records,
                const std::filesystem::path& path) {
  write_file_atomic(path, build_page(records), /*read_only=*/true);
}

PageReader::PageReader(const std::filesystem::path& path)
    : bytes_(read_file_bytes(path)) {
  validate();
}

PageReader::PageReader(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {
  validate();
}

void PageReader::validate() {
  ByteReader r(bytes_);
  const std::vector<uint8_t> magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw CorruptStore("bad page magic");
  }
  const uint16_t version = r.u16();
  if (version != kVersion) {
    throw UnsupportedVersion("page version " + std::to_string(version) +
                             " is not supported");
  }
  const uint32_t count = r.u32();
  if (r.remaining() / 16 < count) {
    throw CorruptStore("page record table exceeds file size");
  }
  offsets_.clear();
  offsets_.reserve(count);
  // The writer lays records out contiguously right after the table; any
  // header byte that changes breaks one of these equalities.
  uint64_t expected = kFixedHeader + 16ull * count;
  for (uint32_t i = 0; i < count; ++i) {
    const uint64_t off = r.u64();
    const uint64_t len = r.u64();
    if (off != expected) throw CorruptStore("page record offsets not contiguous");
    if (len > bytes_.size() || off > bytes_.size() - len) {
      throw CorruptStore("page record out of bounds");
    }
    offsets_.emplace_back(off, len);
    expected = off + len;
  }
  if (expected != bytes_.size()) {
    throw CorruptStore("page size does not match record table");
  }
}

DeltaRecord PageReader::read_record(size_t i) const {
  return parse_record(record_bytes(i));
}

std::span<const uint8_t> PageReader::record_bytes(size_t i) const {
  if (i >= offsets_.size()) {
    throw NotFound("record index " + std::to_string(i) + " out of range");
  }
  const auto [off, len] = offsets_[i];
  return std::span<const uint8_t>(bytes_.data() + off, len);
}

std::vector<DeltaRecord> PageReader::read_all() const {
  std::vector<DeltaRecord> out;
  out.reserve(offsets_.size());
  for (size_t i = 0; i < offsets_.size(); ++i) out.push_back(read_record(i));
  return out;
}

}  // namespace deltastore
