#pragma once
// Quantization math: 8-bit linear base quantization, delta encoding,
// adaptive n-bit delta quantization, dequantization, and MSB truncation
// for partial-precision loading.
//
// All arithmetic runs in double precision regardless of payload width.
// Base dequantization rounds through float32 everywhere (search kernel,
// delta encoding, reconstruction), so the base quantization error cancels
// out of the end-to-end bound: a delta is always encoded against exactly
// the values the loader will add it back to.

#include <cstdint>
#include <span>
#include <vector>

#include "deltastore/bitpack.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

// 8-bit linearly quantized tensor, the payload of an index vertex.
struct QuantizedBase {
  std::vector<uint8_t> codes;
  QuantParams params;

  uint64_t elem_count() const { return codes.size(); }
};

// Bit-packed n-bit quantized delta plus everything needed to reconstruct:
// quantization params, base reference, and the original tensor shape.
struct QuantizedDelta {
  std::vector<uint8_t> payload;  // packed LSB-first, little-endian bytes
  int nbit = 1;
  QuantParams params;
  BaseRef base;
  uint64_t elem_count = 0;
  std::vector<uint64_t> original_shape;
};

// Element-wise difference in double precision, with its extrema.
struct DeltaVector {
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;

  double range() const { return max - min; }
};

// s = (max - min) / 255 (s = 1 for a constant tensor); codes round half
// away from zero and clamp to [0, 255]. Throws InvalidTensor when empty.
QuantizedBase quantize_base(const Tensor& t);

// x̂_i = float32(x_min + code_i * s). Float32 is the canonical output type;
// dequantize_base_f64 returns the same values widened to double.
Tensor dequantize_base(const QuantizedBase& qb);
std::vector<double> dequantize_base_f64(const QuantizedBase& qb);

// δ = t - base_full, element-wise in double. Throws ShapeMismatch when the
// element counts differ.
DeltaVector delta_encode(const Tensor& t, const Tensor& base_full);

// Minimal bit width so that floor(range / 2p) + 1 distinct codes fit:
// nbit = clamp(ceil(log2(floor(range / 2p) + 1)), 1, 32). Monotone
// non-decreasing in range, non-increasing in p. Throws ToleranceTooTight
// when more than 32 bits would be required.
int compute_nbit(double delta_range, PrecisionTolerance p);

// Linear quantization with bin width scale = 2p anchored at delta_min:
// code_i = floor((δ_i - δ_min) / scale), guaranteeing unsigned codes.
QuantizedDelta quantize_delta(const DeltaVector& delta, PrecisionTolerance p,
                              BaseRef base,
                              std::vector<uint64_t> original_shape);

// Half-bin reconstruction δ̂_i = δ_min + (code_i + 0.5) * scale, so the
// worst-case error is p at full width and p * 2^(nbit - b) at width b.
std::vector<double> dequantize_delta(const QuantizedDelta& qd);

// Keeps only the b most significant bits of every code and scales the bin
// width by 2^(nbit - b). Identity when nbit <= b; never pads.
QuantizedDelta truncate_msb(const QuantizedDelta& qd, int b);

}  // namespace deltastore
