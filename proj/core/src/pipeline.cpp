#include "deltastore/pipeline.hpp"

#include <thread>

#include "deltastore/errors.hpp"

namespace deltastore {

namespace {

struct RawRecord {
  size_t index;
  std::vector<uint8_t> bytes;
};

struct ReconTensor {
  size_t index;
  std::string name;
  ExecValue value;
};

}  // namespace

ExecResult pipelined_load_execute(Store& store, const std::string& name,
                                  const std::map<std::string, Tensor>& inputs,
                                  const PipelineOptions& options) {
  const CatalogEntry ce = store.catalog().get(name);
  const std::vector<uint8_t> arch_bytes = store.arch().get(ce.arch_key);
  ModelGraph graph;
  try {
    graph = parse_graph_doc(std::string(arch_bytes.begin(), arch_bytes.end()));
  } catch (const Error& e) {
    throw CorruptStore("stored architecture unreadable for '" + ce.name +
                       "': " + e.what());
  }

  PageReader page(store.resolve(ce.page_path));
  const size_t n = page.record_count();

  // Record the share count of each base vertex before streaming, so the
  // reconstruction stage can drop dequantized bases at zero.
  std::map<BaseRef, int> share_counts;
  for (size_t i = 0; i < n; ++i) {
    const RecordPrefix prefix = parse_record_prefix(page.record_bytes(i));
    if (!prefix.base.is_none()) ++share_counts[prefix.base];
  }

  BoundedChannel<RawRecord> raw_ch(1);
  BoundedChannel<ReconTensor> recon_ch(1);
  std::exception_ptr stage_error;
  std::mutex error_mu;
  auto record_error = [&] {
    std::lock_guard<std::mutex> lock(error_mu);
    if (!stage_error) stage_error = std::current_exception();
  };

  std::thread io_stage([&] {
    try {
      for (size_t i = 0; i < n; ++i) {
        if (options.stage_delay[0].count() > 0) {
          std::this_thread::sleep_for(options.stage_delay[0]);
        }
        const auto span = page.record_bytes(i);
        raw_ch.push(RawRecord{i, {span.begin(), span.end()}});
      }
    } catch (...) {
      record_error();
    }
    raw_ch.close();
  });

  std::thread recon_stage([&] {
    std::map<BaseRef, std::shared_ptr<const std::vector<double>>> base_memo;
    std::map<BaseRef, int> remaining = share_counts;
    try {
      while (auto raw = raw_ch.pop()) {
        if (options.stage_delay[1].count() > 0) {
          std::this_thread::sleep_for(options.stage_delay[1]);
        }
        const DeltaRecord record = parse_record(raw->bytes);
        ExecValue value;
        if (record.is_inline()) {
          value = ExecValue::from_tensor(record.inline_tensor());
        } else {
          QuantizedDelta qd = record.to_quantized();
          if (!options.bits.is_full() && options.bits.bits < qd.nbit) {
            qd = truncate_msb(qd, options.bits.bits);
          }
          std::shared_ptr<const std::vector<double>> base;
          auto memo = base_memo.find(record.base);
          if (memo != base_memo.end()) {
            base = memo->second;
          } else {
            const QuantizedBase qb = store.pool().get_vertex(record.base);
            base = std::make_shared<const std::vector<double>>(
                dequantize_base_f64(qb));
            if (remaining[record.base] > 1) base_memo[record.base] = base;
          }
          if (--remaining[record.base] <= 0) base_memo.erase(record.base);

          const std::vector<double> delta = dequantize_delta(qd);
          if (base->size() != delta.size()) {
            throw CorruptStore("base and delta sizes differ for '" +
                               record.name + "'");
          }
          auto recon = std::make_shared<std::vector<double>>(base->size());
          for (size_t i = 0; i < recon->size(); ++i) {
            (*recon)[i] = (*base)[i] + delta[i];
          }
          value = ExecValue{record.shape, std::move(recon)};
        }
        recon_ch.push(ReconTensor{raw->index, record.name, std::move(value)});
      }
    } catch (...) {
      record_error();
      raw_ch.close();
    }
    recon_ch.close();
  });

  // Compute stage: runs on the calling thread. Tensors arrive in record
  // order, which the page guarantees is architecture order; a small stash
  // absorbs any lookahead.
  std::map<std::string, ExecValue> stash;
  auto provider = [&](const std::string& want) -> ExecValue {
    auto it = stash.find(want);
    while (it == stash.end()) {
      auto item = recon_ch.pop();
      if (!item) {
        throw CorruptStore("stored tensor stream ended before '" + want + "'");
      }
      if (options.stage_delay[2].count() > 0) {
        std::this_thread::sleep_for(options.stage_delay[2]);
      }
      stash.emplace(item->name, std::move(item->value));
      it = stash.find(want);
    }
    ExecValue value = std::move(it->second);
    stash.erase(it);
    return value;
  };

  ExecResult result;
  std::exception_ptr exec_error;
  try {
    result = execute(graph, inputs, ExecEnv{}, provider);
  } catch (...) {
    exec_error = std::current_exception();
  }

  // Drain so the stages can finish even when execution stopped early or
  // some records feed no node.
  raw_ch.close();
  while (recon_ch.pop()) {
  }
  io_stage.join();
  recon_stage.join();

  {
    std::lock_guard<std::mutex> lock(error_mu);
    if (stage_error) std::rethrow_exception(stage_error);
  }
  if (exec_error) std::rethrow_exception(exec_error);
  return result;
}

}  // namespace deltastore
