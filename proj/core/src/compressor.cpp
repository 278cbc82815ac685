#include "deltastore/compressor.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include "deltastore/page.hpp"
#include "deltastore/quantizer.hpp"
#include "deltastore/stats.hpp"

namespace deltastore {

namespace {

std::string page_file_name(const std::string& model_name) {
  std::string safe;
  safe.reserve(model_name.size());
  for (char c : model_name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    safe.push_back(ok ? c : '_');
  }
  if (safe.size() > 80) safe.resize(80);
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : model_name) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  char tag[10];
  std::snprintf(tag, sizeof(tag), "%08x", static_cast<uint32_t>(h));
  return safe + "-" + tag + ".page";
}

struct TensorResult {
  DeltaRecord record;
  TensorReport report;
};

TensorResult process_tensor(const Tensor& t, PrecisionTolerance p,
                            SimilarityThreshold tau, IndexPool& pool) {
  TensorResult res;
  res.report.name = t.name;

  const Tensor flat = flatten(t);
  if (flat.elem_count() < kInlineThreshold) {
    res.record = DeltaRecord::make_inline(t);
    res.report.nbit = 32;
    res.report.inlined = true;
    res.report.stored_bytes = serialize_record(res.record).size();
    return res;
  }

  BaseRef ref;
  DeltaVector delta;
  bool matched = false;
  if (const auto hit = pool.search_nearest(flat)) {
    const QuantizedBase qb = pool.get_vertex(hit->ref);
    DeltaVector candidate = delta_encode(flat, dequantize_base(qb));
    if (should_compress(candidate.range(), tau)) {
      ref = hit->ref;
      delta = std::move(candidate);
      matched = true;
    }
  }
  if (!matched) {
    // No admissible base: index this tensor's own 8-bit quantization and
    // store the residual against it.
    const QuantizedBase qb = quantize_base(flat);
    ref = pool.insert_base(qb);
    delta = delta_encode(flat, dequantize_base(qb));
    res.report.new_vertex = true;
  }

  const QuantizedDelta qd = quantize_delta(delta, p, ref, t.shape);
  res.record = DeltaRecord::from_quantized(t.name, qd);
  res.report.nbit = qd.nbit;
  res.report.delta_range = delta.range();
  res.report.stored_bytes = serialize_record(res.record).size();
  return res;
}

}  // namespace

bool should_compress(double delta_range, SimilarityThreshold tau) {
  return delta_range <= tau.value();
}

SaveReport compress_model(const SaveRequest& request, Store& store,
                          CompressOptions options) {
  if (store.catalog().find(request.model_name)) {
    throw DuplicateName("model name already exists: " + request.model_name);
  }
  request.architecture.validate();
  const auto& inits = request.architecture.initializers;
  if (inits.size() != request.tensors.size()) {
    throw InvalidTensor("save request has " +
                        std::to_string(request.tensors.size()) +
                        " tensors for " + std::to_string(inits.size()) +
                        " initializer slots");
  }
  for (size_t i = 0; i < inits.size(); ++i) {
    const Tensor& t = request.tensors[i];
    t.validate();
    if (t.name != inits[i].name || t.shape != inits[i].shape) {
      throw InvalidTensor("tensor '" + t.name +
                          "' does not match initializer slot '" +
                          inits[i].name + "'");
    }
  }

  const size_t n = request.tensors.size();
  std::vector<TensorResult> results(n);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        results[i] = process_tensor(request.tensors[i], request.tolerance,
                                    request.threshold, store.pool());
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  const int threads = std::clamp(options.threads, 1, 64);
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> group;
    group.reserve(threads);
    for (int i = 0; i < threads; ++i) group.emplace_back(worker);
    for (std::thread& th : group) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<DeltaRecord> records;
  records.reserve(n);
  for (TensorResult& r : results) records.push_back(std::move(r.record));

  const std::string page_rel = "pages/" + page_file_name(request.model_name);
  const std::filesystem::path page_path = store.resolve(page_rel);
  write_page(records, page_path);

  const std::string doc = serialize_graph_doc(request.architecture);
  const std::string arch_key = store.arch().put(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(doc.data()), doc.size()));

  // Make the index state durable before the catalog entry commits the save.
  store.pool().flush();
  const CatalogEntry entry = store.catalog().put(
      request.model_name, page_rel, arch_key, request.tolerance.value());

  SaveReport report;
  report.model_id = entry.model_id;
  for (TensorResult& r : results) {
    report.new_vertex_count += r.report.new_vertex ? 1 : 0;
    report.tensors.push_back(std::move(r.report));
  }
  for (const Tensor& t : request.tensors) {
    report.original_bytes += t.elem_count() * 4;
  }
  report.stored_bytes =
      static_cast<uint64_t>(std::filesystem::file_size(page_path));
  const auto refs = compute_ref_counts(store);
  report.amortized_index_bytes =
      amortized_index_bytes_for(store, records, refs);
  const double denom = static_cast<double>(report.stored_bytes) +
                       report.amortized_index_bytes;
  report.ratio = report.original_bytes > 0 && denom > 0
                     ? static_cast<double>(report.original_bytes) / denom
                     : 1.0;
  return report;
}

}  // namespace deltastore
