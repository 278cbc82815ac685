#pragma once
// Model loading at a chosen delta bit width. Only quantized forms are kept
// resident; reconstruction happens on demand, either eagerly or through
// dequantize/add nodes inserted into the computation graph.

#include <map>
#include <memory>
#include <string>

#include "deltastore/executor.hpp"
#include "deltastore/model_graph.hpp"
#include "deltastore/page.hpp"
#include "deltastore/store.hpp"

namespace deltastore {

// Requested delta bit width; 0 means full stored width.
struct LoadBits {
  int bits = 0;

  static LoadBits full() { return LoadBits{0}; }
  static LoadBits at(int b);
  bool is_full() const { return bits == 0; }
};

struct LoadedEntry {
  DeltaRecord record;  // payload truncated when loaded at reduced width
  std::shared_ptr<const QuantizedBase> base;    // null for inline records
  std::shared_ptr<const QuantizedDelta> delta;  // null for inline records

  bool is_inline() const { return record.is_inline(); }
};

struct LoadedModel {
  CatalogEntry catalog_entry;
  ModelGraph graph;
  std::vector<LoadedEntry> entries;  // page record order
  std::map<std::string, size_t> by_name;
  std::map<BaseRef, int> share_counts;  // initializers per base vertex

  const LoadedEntry& entry(const std::string& name) const;
  // Quantized bytes held in memory: packed delta payloads plus one copy of
  // each referenced base vertex's codes.
  size_t resident_payload_bytes() const;
};

LoadedModel load_model(Store& store, const std::string& name, LoadBits bits);
LoadedModel load_model(Store& store, uint64_t model_id, LoadBits bits);

// Canonical reconstruction: dequantized base plus dequantized delta, in
// double precision; inline records reproduce their floats exactly.
std::vector<double> reconstruct_f64(const LoadedEntry& entry);
// Float32 user-facing form with the original shape.
Tensor reconstruct_tensor(const LoadedEntry& entry);

// The graph with DequantizeLinear/DequantizeLinear/Add reconstruction
// subgraphs spliced in front of every compressed initializer, plus the
// bindings the executor needs to run it.
struct AugmentedModel {
  ModelGraph graph;
  ExecEnv env;
};
AugmentedModel augment_graph(const LoadedModel& lm);

// Serving path: execute the augmented graph.
ExecResult run_augmented(const LoadedModel& lm,
                         const std::map<std::string, Tensor>& inputs);
// Oracle twin: eagerly reconstruct every initializer, then execute the
// original graph. Bitwise-identical outputs to run_augmented.
ExecResult run_eager(const LoadedModel& lm,
                     const std::map<std::string, Tensor>& inputs);

}  // namespace deltastore
