#pragma once
// Fixed-width bit packing for quantized delta payloads.
//
// Normative layout: codes are packed LSB-first into a little-endian byte
// stream. Code i occupies stream bits [i*nbit, (i+1)*nbit); stream bit j
// lives in byte j/8 at bit position j%8. The final byte is zero-padded.

#include <cstdint>
#include <span>
#include <vector>

namespace deltastore {

inline size_t packed_byte_size(uint64_t elem_count, int nbit) {
  return static_cast<size_t>((elem_count * static_cast<uint64_t>(nbit) + 7) / 8);
}

// nbit must be in [1, 32]; every code must be < 2^nbit.
std::vector<uint8_t> pack_bits(std::span<const uint32_t> codes, int nbit);

// Exact inverse of pack_bits for a payload of packed_byte_size bytes.
std::vector<uint32_t> unpack_bits(std::span<const uint8_t> payload,
                                  uint64_t elem_count, int nbit);

}  // namespace deltastore
