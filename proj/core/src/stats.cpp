#include "deltastore/stats.hpp"

#include <algorithm>

namespace deltastore {

std::map<BaseRef, uint64_t> compute_ref_counts(Store& store) {
  std::map<BaseRef, uint64_t> refs;
  for (const CatalogEntry& entry : store.catalog().list()) {
    PageReader page(store.resolve(entry.page_path));
    for (size_t i = 0; i < page.record_count(); ++i) {
      const DeltaRecord rec = page.read_record(i);
      if (!rec.is_inline()) ++refs[rec.base];
    }
  }
  return refs;
}

double amortized_index_bytes_for(Store& store,
                                 const std::vector<DeltaRecord>& records,
                                 const std::map<BaseRef, uint64_t>& refs) {
  // Group by pool key so each index is visited once.
  std::map<uint64_t, std::vector<const DeltaRecord*>> by_pool;
  for (const DeltaRecord& rec : records) {
    if (!rec.is_inline()) by_pool[rec.base.index_id].push_back(&rec);
  }
  double total = 0.0;
  for (const auto& entry : by_pool) {
    const std::vector<const DeltaRecord*>& recs = entry.second;
    store.pool().with_index(entry.first, [&](const HnswIndex& index) {
      for (const DeltaRecord* rec : recs) {
        const auto it = refs.find(rec->base);
        const uint64_t count = it == refs.end() ? 1 : it->second;
        total += static_cast<double>(
                     index.vertex_storage_bytes(rec->base.vertex_id)) /
                 static_cast<double>(count);
      }
    });
  }
  return total;
}

StoreStats compute_store_stats(Store& store) {
  StoreStats stats;
  stats.index_bytes = store.index_file_bytes();
  const std::map<BaseRef, uint64_t> refs = compute_ref_counts(store);

  for (const CatalogEntry& entry : store.catalog().list()) {
    PageReader page(store.resolve(entry.page_path));
    std::vector<DeltaRecord> records = page.read_all();

    ModelStats m;
    m.model_id = entry.model_id;
    m.name = entry.name;
    m.page_bytes = page.file_bytes();
    for (const DeltaRecord& rec : records) {
      m.original_bytes += rec.elem_count() * 4;
      if (rec.is_inline()) {
        ++stats.inline_record_count;
      } else {
        ++stats.delta_record_count;
        stats.bits_saved_sum +=
            rec.nbit > 8 ? static_cast<uint64_t>(rec.nbit - 8) : 0;
      }
    }
    m.amortized_index_bytes = amortized_index_bytes_for(store, records, refs);
    const double denom =
        static_cast<double>(m.page_bytes) + m.amortized_index_bytes;
    m.ratio = m.original_bytes > 0 && denom > 0
                  ? static_cast<double>(m.original_bytes) / denom
                  : 1.0;

    stats.original_bytes += m.original_bytes;
    stats.page_bytes += m.page_bytes;
    stats.models.push_back(std::move(m));
  }
  stats.model_count = stats.models.size();
  stats.mean_bits_saved =
      stats.delta_record_count > 0
          ? static_cast<double>(stats.bits_saved_sum) /
                static_cast<double>(stats.delta_record_count)
          : 0.0;
  return stats;
}

}  // namespace deltastore
