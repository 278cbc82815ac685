#pragma once
// Store-wide accounting: per-model compression ratios with evenly
// distributed base-tensor costs, and the bits saved by 8-bit partial
// loading.
//
// The cost of each index vertex is split evenly across all records that
// reference it, store-wide. A model's amortized index bytes are the sum of
// its records' shares; summed over all models this reproduces the total
// bytes of referenced vertices exactly.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltastore/page.hpp"
#include "deltastore/store.hpp"

namespace deltastore {

struct ModelStats {
  uint64_t model_id = 0;
  std::string name;
  uint64_t original_bytes = 0;
  uint64_t page_bytes = 0;
  double amortized_index_bytes = 0.0;
  double ratio = 1.0;
};

struct StoreStats {
  uint64_t model_count = 0;
  uint64_t original_bytes = 0;
  uint64_t page_bytes = 0;
  uint64_t index_bytes = 0;  // total index file bytes
  // Bits saved by 8-bit loading, over delta records only (inline records
  // are never truncated).
  uint64_t bits_saved_sum = 0;
  uint64_t delta_record_count = 0;
  uint64_t inline_record_count = 0;
  double mean_bits_saved = 0.0;
  std::vector<ModelStats> models;
};

// Reference counts per vertex across every cataloged model.
std::map<BaseRef, uint64_t> compute_ref_counts(Store& store);

// Amortized index bytes for one model's records under the given store-wide
// reference counts.
double amortized_index_bytes_for(Store& store,
                                 const std::vector<DeltaRecord>& records,
                                 const std::map<BaseRef, uint64_t>& refs);

StoreStats compute_store_stats(Store& store);

}  // namespace deltastore
