#include "deltastore/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <limits>

namespace deltastore {

QuantizedBase quantize_base(const Tensor& t) {
  if (t.data.empty()) throw InvalidTensor("cannot quantize an empty tensor");
  double lo = t.data[0];
  double hi = t.data[0];
  for (float v : t.data) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidTensor("cannot quantize a non-finite tensor");
  }
  const double s = hi > lo ? (hi - lo) / 255.0 : 1.0;
  QuantizedBase qb;
  qb.params = QuantParams{s, lo};
  qb.codes.resize(t.data.size());
  for (size_t i = 0; i < t.data.size(); ++i) {
    const double q = std::round((static_cast<double>(t.data[i]) - lo) / s);
    qb.codes[i] = static_cast<uint8_t>(std::clamp(q, 0.0, 255.0));
  }
  return qb;
}

Tensor dequantize_base(const QuantizedBase& qb) {
  Tensor out;
  out.shape = {qb.elem_count()};
  out.data.resize(qb.codes.size());
  const double s = qb.params.scale;
  const double lo = qb.params.delta_min;
  for (size_t i = 0; i < qb.codes.size(); ++i) {
    out.data[i] = static_cast<float>(lo + static_cast<double>(qb.codes[i]) * s);
  }
  return out;
}

std::vector<double> dequantize_base_f64(const QuantizedBase& qb) {
  std::vector<double> out(qb.codes.size());
  const double s = qb.params.scale;
  const double lo = qb.params.delta_min;
  for (size_t i = 0; i < qb.codes.size(); ++i) {
    out[i] = static_cast<double>(
        static_cast<float>(lo + static_cast<double>(qb.codes[i]) * s));
  }
  return out;
}

DeltaVector delta_encode(const Tensor& t, const Tensor& base_full) {
  if (t.data.size() != base_full.data.size()) {
    throw ShapeMismatch("delta_encode: element counts differ (" +
                        std::to_string(t.data.size()) + " vs " +
                        std::to_string(base_full.data.size()) + ")");
  }
  DeltaVector dv;
  dv.values.resize(t.data.size());
  dv.min = std::numeric_limits<double>::infinity();
  dv.max = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < t.data.size(); ++i) {
    const double d =
        static_cast<double>(t.data[i]) - static_cast<double>(base_full.data[i]);
    dv.values[i] = d;
    dv.min = std::min(dv.min, d);
    dv.max = std::max(dv.max, d);
  }
  if (dv.values.empty()) {
    dv.min = dv.max = 0.0;
  }
  return dv;
}

int compute_nbit(double delta_range, PrecisionTolerance p) {
  if (!(delta_range >= 0.0) || !std::isfinite(delta_range)) {
    throw InvalidTensor("delta range must be finite and non-negative");
  }
  const double bins = std::floor(delta_range / (2.0 * p.value()));
  if (!(bins <= 4294967295.0)) {
    throw ToleranceTooTight(
        "delta range " + std::to_string(delta_range) +
        " needs more than 32 bits at tolerance " + std::to_string(p.value()));
  }
  const uint64_t bin_count = static_cast<uint64_t>(bins) + 1;
  if (bin_count <= 1) return 1;
  return std::max(1, static_cast<int>(std::bit_width(bin_count - 1)));
}

QuantizedDelta quantize_delta(const DeltaVector& delta, PrecisionTolerance p,
                              BaseRef base,
                              std::vector<uint64_t> original_shape) {
  const int nbit = compute_nbit(delta.range(), p);
  const double scale = 2.0 * p.value();
  const double dmin = delta.min;
  const uint32_t max_code =
      nbit == 32 ? std::numeric_limits<uint32_t>::max() : (1u << nbit) - 1;

  std::vector<uint32_t> codes(delta.values.size());
  for (size_t i = 0; i < delta.values.size(); ++i) {
    const double d = delta.values[i];
    double q = std::floor((d - dmin) / scale);
    uint32_t c = static_cast<uint32_t>(
        std::clamp(q, 0.0, static_cast<double>(max_code)));
    // Near a bin edge the double division can land one bin off; snap to
    // whichever adjacent midpoint reconstructs closest.
    double best = std::abs(dmin + (static_cast<double>(c) + 0.5) * scale - d);
    if (c > 0) {
      const double lower =
          std::abs(dmin + (static_cast<double>(c) - 0.5) * scale - d);
      if (lower < best) {
        best = lower;
        --c;
      }
    }
    if (c < max_code) {
      const double upper =
          std::abs(dmin + (static_cast<double>(c) + 1.5) * scale - d);
      if (upper < best) ++c;
    }
    codes[i] = c;
  }

  QuantizedDelta qd;
  qd.payload = pack_bits(codes, nbit);
  qd.nbit = nbit;
  qd.params = QuantParams{scale, dmin};
  qd.base = base;
  qd.elem_count = delta.values.size();
  qd.original_shape = std::move(original_shape);
  return qd;
}

std::vector<double> dequantize_delta(const QuantizedDelta& qd) {
  const std::vector<uint32_t> codes =
      unpack_bits(qd.payload, qd.elem_count, qd.nbit);
  std::vector<double> out(codes.size());
  const double scale = qd.params.scale;
  const double dmin = qd.params.delta_min;
  for (size_t i = 0; i < codes.size(); ++i) {
    out[i] = dmin + (static_cast<double>(codes[i]) + 0.5) * scale;
  }
  return out;
}

QuantizedDelta truncate_msb(const QuantizedDelta& qd, int b) {
  if (b < 1) throw InvalidTensor("truncation width must be at least 1 bit");
  if (qd.nbit <= b) return qd;
  const int drop = qd.nbit - b;
  std::vector<uint32_t> codes = unpack_bits(qd.payload, qd.elem_count, qd.nbit);
  for (uint32_t& c : codes) c >>= drop;
  QuantizedDelta out = qd;
  out.payload = pack_bits(codes, b);
  out.nbit = b;
  out.params.scale = qd.params.scale * std::exp2(drop);
  return out;
}

}  // namespace deltastore
