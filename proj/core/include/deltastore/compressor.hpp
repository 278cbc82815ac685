#pragma once
// Model compression: decouple weights from the architecture, search the
// per-shape index for the nearest base, delta-encode, and store adaptive
// n-bit quantized deltas in one tensor page per model.

#include <cstdint>
#include <string>
#include <vector>

#include "deltastore/model_graph.hpp"
#include "deltastore/store.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

// Tensors with fewer elements than this bypass the index and are stored as
// exact inline records; graph search over tiny vectors costs more than it
// saves.
inline constexpr uint64_t kInlineThreshold = 16;

struct SaveRequest {
  std::string model_name;
  ModelGraph architecture;
  std::vector<Tensor> tensors;  // one per initializer, in architecture order
  PrecisionTolerance tolerance;
  SimilarityThreshold threshold;
};

struct TensorReport {
  std::string name;
  int nbit = 0;
  uint64_t stored_bytes = 0;  // serialized record size
  bool new_vertex = false;
  bool inlined = false;
  double delta_range = 0.0;
};

struct SaveReport {
  uint64_t model_id = 0;
  std::vector<TensorReport> tensors;
  uint64_t original_bytes = 0;
  uint64_t stored_bytes = 0;  // page file size
  double amortized_index_bytes = 0.0;
  double ratio = 1.0;  // original / (stored + amortized index)
  uint64_t new_vertex_count = 0;
};

struct CompressOptions {
  int threads = 1;  // workers pulling tensors from a shared queue
};

// delta range <= tau, inclusive.
bool should_compress(double delta_range, SimilarityThreshold tau);

// Runs the full save: one page in architecture order, the architecture in
// the meta store, and a catalog entry as the commit point. A tolerance
// failure on any tensor aborts the whole save and leaves no catalog entry;
// vertices inserted before the failure stay in the index (they remain
// valid bases for future saves).
SaveReport compress_model(const SaveRequest& request, Store& store,
                          CompressOptions options = {});

}  // namespace deltastore
