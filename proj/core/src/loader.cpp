#include "deltastore/loader.hpp"

#include <algorithm>

#include "deltastore/errors.hpp"

namespace deltastore {

LoadBits LoadBits::at(int b) {
  if (b < 1 || b > 32) {
    throw InvalidTensor("load bit width must be in [1, 32]");
  }
  return LoadBits{b};
}

const LoadedEntry& LoadedModel::entry(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) {
    throw NotFound("no stored tensor named '" + name + "'");
  }
  return entries[it->second];
}

size_t LoadedModel::resident_payload_bytes() const {
  size_t bytes = 0;
  std::map<BaseRef, size_t> base_seen;
  for (const LoadedEntry& e : entries) {
    bytes += e.record.payload.size();
    if (e.base && !base_seen.count(e.record.base)) {
      base_seen[e.record.base] = 1;
      bytes += e.base->codes.size();
    }
  }
  return bytes;
}

namespace {

LoadedModel load_from_entry(Store& store, const CatalogEntry& ce,
                            LoadBits bits) {
  LoadedModel lm;
  lm.catalog_entry = ce;

  const std::vector<uint8_t> arch_bytes = store.arch().get(ce.arch_key);
  try {
    lm.graph = parse_graph_doc(
        std::string(arch_bytes.begin(), arch_bytes.end()));
  } catch (const UnsupportedVersion&) {
    throw;
  } catch (const Error& e) {
    throw CorruptStore("stored architecture unreadable for '" + ce.name +
                       "': " + e.what());
  }

  PageReader page(store.resolve(ce.page_path));
  // One fetch per distinct base vertex, even when shared.
  std::map<BaseRef, std::shared_ptr<const QuantizedBase>> fetched;
  for (size_t i = 0; i < page.record_count(); ++i) {
    LoadedEntry entry;
    entry.record = page.read_record(i);
    if (!entry.record.is_inline()) {
      QuantizedDelta qd = entry.record.to_quantized();
      if (!bits.is_full() && bits.bits < qd.nbit) {
        qd = truncate_msb(qd, bits.bits);
        entry.record = DeltaRecord::from_quantized(entry.record.name, qd);
      }
      auto it = fetched.find(qd.base);
      if (it == fetched.end()) {
        it = fetched
                 .emplace(qd.base, std::make_shared<const QuantizedBase>(
                                       store.pool().get_vertex(qd.base)))
                 .first;
      }
      entry.base = it->second;
      entry.delta = std::make_shared<const QuantizedDelta>(std::move(qd));
      ++lm.share_counts[entry.record.base];
    }
    lm.by_name[entry.record.name] = lm.entries.size();
    lm.entries.push_back(std::move(entry));
  }
  return lm;
}

}  // namespace

LoadedModel load_model(Store& store, const std::string& name, LoadBits bits) {
  return load_from_entry(store, store.catalog().get(name), bits);
}

LoadedModel load_model(Store& store, uint64_t model_id, LoadBits bits) {
  return load_from_entry(store, store.catalog().get(model_id), bits);
}

std::vector<double> reconstruct_f64(const LoadedEntry& entry) {
  if (entry.is_inline()) {
    const Tensor t = entry.record.inline_tensor();
    return std::vector<double>(t.data.begin(), t.data.end());
  }
  std::vector<double> base = dequantize_base_f64(*entry.base);
  const std::vector<double> delta = dequantize_delta(*entry.delta);
  if (base.size() != delta.size()) {
    throw CorruptStore("base and delta sizes differ for '" +
                       entry.record.name + "'");
  }
  for (size_t i = 0; i < base.size(); ++i) base[i] += delta[i];
  return base;
}

Tensor reconstruct_tensor(const LoadedEntry& entry) {
  if (entry.is_inline()) return entry.record.inline_tensor();
  const std::vector<double> values = reconstruct_f64(entry);
  Tensor t;
  t.name = entry.record.name;
  t.shape = entry.record.shape;
  t.data.reserve(values.size());
  for (double v : values) t.data.push_back(static_cast<float>(v));
  return t;
}

AugmentedModel augment_graph(const LoadedModel& lm) {
  AugmentedModel am;
  am.graph = lm.graph;
  am.env.share_counts = lm.share_counts;

  std::vector<TensorSig> kept;
  for (const TensorSig& sig : lm.graph.initializers) {
    const LoadedEntry& entry = lm.entry(sig.name);
    if (entry.is_inline()) {
      kept.push_back(sig);
      am.env.constants[sig.name] =
          ExecValue::from_tensor(entry.record.inline_tensor());
      continue;
    }
    const std::string base_slot = sig.name + "#base";
    const std::string delta_slot = sig.name + "#delta";
    const uint64_t elems = entry.record.elem_count();
    kept.push_back(TensorSig{base_slot, {elems}});
    kept.push_back(TensorSig{delta_slot, entry.record.shape});

    QuantBinding base_binding;
    base_binding.kind = QuantBinding::Kind::kBase;
    base_binding.base = entry.base;
    base_binding.ref = entry.record.base;
    base_binding.shape = {elems};
    am.env.quantized[base_slot] = std::move(base_binding);

    // The delta keeps the original tensor shape; the reconstruction add
    // then yields a value with that shape for downstream consumers.
    QuantBinding delta_binding;
    delta_binding.kind = QuantBinding::Kind::kDelta;
    delta_binding.delta = entry.delta;
    delta_binding.shape = entry.record.shape;
    am.env.quantized[delta_slot] = std::move(delta_binding);

    GraphNode deq_base;
    deq_base.id = "deq_base:" + sig.name;
    deq_base.op = OpKind::kDequantizeLinear;
    deq_base.inputs = {base_slot};
    deq_base.output = sig.name + "#base_f";
    GraphNode deq_delta;
    deq_delta.id = "deq_delta:" + sig.name;
    deq_delta.op = OpKind::kDequantizeLinear;
    deq_delta.inputs = {delta_slot};
    deq_delta.output = sig.name + "#delta_f";
    GraphNode add;
    add.id = "recon:" + sig.name;
    add.op = OpKind::kAdd;
    add.inputs = {deq_base.output, deq_delta.output};
    // The add takes over the initializer's value name, so consumer nodes
    // stay untouched.
    add.output = sig.name;
    am.graph.nodes.push_back(std::move(deq_base));
    am.graph.nodes.push_back(std::move(deq_delta));
    am.graph.nodes.push_back(std::move(add));
  }
  am.graph.initializers = std::move(kept);
  am.graph.validate();
  return am;
}

ExecResult run_augmented(const LoadedModel& lm,
                         const std::map<std::string, Tensor>& inputs) {
  const AugmentedModel am = augment_graph(lm);
  return execute(am.graph, inputs, am.env);
}

ExecResult run_eager(const LoadedModel& lm,
                     const std::map<std::string, Tensor>& inputs) {
  ExecEnv env;
  // Dequantize each referenced base once, mirroring the memoized path.
  std::map<BaseRef, std::shared_ptr<const std::vector<double>>> base_cache;
  for (const TensorSig& sig : lm.graph.initializers) {
    const LoadedEntry& entry = lm.entry(sig.name);
    if (entry.is_inline()) {
      env.constants[sig.name] =
          ExecValue::from_tensor(entry.record.inline_tensor());
      continue;
    }
    auto it = base_cache.find(entry.record.base);
    if (it == base_cache.end()) {
      it = base_cache
               .emplace(entry.record.base,
                        std::make_shared<const std::vector<double>>(
                            dequantize_base_f64(*entry.base)))
               .first;
    }
    const std::vector<double>& base = *it->second;
    const std::vector<double> delta = dequantize_delta(*entry.delta);
    auto recon = std::make_shared<std::vector<double>>(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
      (*recon)[i] = base[i] + delta[i];
    }
    env.constants[sig.name] =
        ExecValue{entry.record.shape, std::move(recon)};
  }
  return execute(lm.graph, inputs, env);
}

}  // namespace deltastore
