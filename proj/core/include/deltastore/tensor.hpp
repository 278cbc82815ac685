#pragma once
// Core domain types: float32 weight tensors, the precision tolerance and
// similarity threshold knobs, quantization parameters, and base-tensor
// references. All types are immutable value types once constructed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "deltastore/errors.hpp"

namespace deltastore {

// The default per-element absolute error bound: 2^-24, just below the
// float32 machine epsilon.
inline constexpr double kDefaultTolerance = 0x1p-24;

// Default maximum admissible delta range for reusing an existing base.
inline constexpr double kDefaultTau = 0.16;

// A named float32 weight tensor. The unit of deduplication.
struct Tensor {
  std::string name;
  std::vector<uint64_t> shape;
  std::vector<float> data;

  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return n;
  }

  // Enforces the ingest invariants: positive dimensions, element count
  // matching the payload, and finite values only.
  void validate() const;
};

// Flattens to shape [product(shape)] with identical data. The original
// shape travels separately (delta records keep it for reconstruction).
Tensor flatten(const Tensor& t);

// Inverse of flatten for a compatible shape.
Tensor unflatten(const Tensor& flat, const std::vector<uint64_t>& shape);

// Per-element absolute reconstruction error bound p. Must be positive.
class PrecisionTolerance {
 public:
  PrecisionTolerance() : value_(kDefaultTolerance) {}
  explicit PrecisionTolerance(double p) : value_(p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InvalidTensor("precision tolerance must be a positive finite number");
    }
  }
  double value() const { return value_; }

 private:
  double value_;
};

// Maximum delta range (max - min) admissible for delta compression.
class SimilarityThreshold {
 public:
  SimilarityThreshold() : value_(kDefaultTau) {}
  explicit SimilarityThreshold(double tau) : value_(tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw InvalidTensor("similarity threshold must be a positive finite number");
    }
  }
  double value() const { return value_; }

 private:
  double value_;
};

// Reference to a vertex in a per-shape index. Pool indexes are keyed by
// element count, so index_id is the element count of the pool. The
// all-ones sentinel marks records stored inline without a base.
struct BaseRef {
  uint64_t index_id = kNone;
  uint64_t vertex_id = kNone;

  static constexpr uint64_t kNone = std::numeric_limits<uint64_t>::max();

  static BaseRef none() { return BaseRef{}; }
  bool is_none() const { return index_id == kNone && vertex_id == kNone; }

  bool operator==(const BaseRef&) const = default;
  bool operator<(const BaseRef& o) const {
    return index_id != o.index_id ? index_id < o.index_id
                                  : vertex_id < o.vertex_id;
  }
};

// Linear quantization parameters: bin width and the additive anchor
// (minimum of the quantized range). Stored per record in double precision.
struct QuantParams {
  double scale = 1.0;
  double delta_min = 0.0;

  bool operator==(const QuantParams&) const = default;
};

}  // namespace deltastore
