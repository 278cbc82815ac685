#include "deltastore/bitpack.hpp"

#include <cassert>
#include <stdexcept>

#include "deltastore/errors.hpp"

namespace deltastore {

std::vector<uint8_t> pack_bits(std::span<const uint32_t> codes, int nbit) {
  if (nbit < 1 || nbit > 32) throw InvalidTensor("nbit out of range [1, 32]");
  std::vector<uint8_t> out(packed_byte_size(codes.size(), nbit), 0);
  uint64_t bit = 0;
  for (uint32_t code : codes) {
    assert(nbit == 32 || code < (1u << nbit));
    int done = 0;
    while (done < nbit) {
      const size_t byte = static_cast<size_t>(bit >> 3);
      const int off = static_cast<int>(bit & 7);
      const int take = std::min(8 - off, nbit - done);
      const uint32_t chunk = (code >> done) & ((take == 32) ? ~0u : ((1u << take) - 1));
      out[byte] = static_cast<uint8_t>(out[byte] | (chunk << off));
      done += take;
      bit += static_cast<uint64_t>(take);
    }
  }
  return out;
}

std::vector<uint32_t> unpack_bits(std::span<const uint8_t> payload,
                                  uint64_t elem_count, int nbit) {
  if (nbit < 1 || nbit > 32) throw InvalidTensor("nbit out of range [1, 32]");
  if (payload.size() != packed_byte_size(elem_count, nbit)) {
    throw CorruptStore("packed payload length does not match element count");
  }
  std::vector<uint32_t> out(elem_count);
  uint64_t bit = 0;
  for (uint64_t i = 0; i < elem_count; ++i) {
    uint32_t code = 0;
    int done = 0;
    while (done < nbit) {
      const size_t byte = static_cast<size_t>(bit >> 3);
      const int off = static_cast<int>(bit & 7);
      const int take = std::min(8 - off, nbit - done);
      const uint32_t chunk =
          (static_cast<uint32_t>(payload[byte]) >> off) &
          ((take == 32) ? ~0u : ((1u << take) - 1));
      code |= chunk << done;
      done += take;
      bit += static_cast<uint64_t>(take);
    }
    out[i] = code;
  }
  return out;
}

}  // namespace deltastore
