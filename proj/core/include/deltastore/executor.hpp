#pragma once
// Minimal computation-graph executor. Internal arithmetic is double
// precision end to end; float32 tensors cross the API boundary. Dequantize
// nodes reconstruct directly from quantized payloads, with dequantized
// base tensors memoized while their share count is positive.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deltastore/model_graph.hpp"
#include "deltastore/quantizer.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

// A shaped view over a shared double buffer; reshapes and memo hits share
// the buffer.
struct ExecValue {
  std::vector<uint64_t> shape;
  std::shared_ptr<const std::vector<double>> data;

  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return n;
  }
  static ExecValue from_tensor(const Tensor& t);
  Tensor to_tensor(const std::string& name) const;
};

// Quantized payload visible to a DequantizeLinear node.
struct QuantBinding {
  enum class Kind { kBase, kDelta };
  Kind kind = Kind::kBase;
  std::shared_ptr<const QuantizedBase> base;
  std::shared_ptr<const QuantizedDelta> delta;
  BaseRef ref;                  // memo key for base payloads
  std::vector<uint64_t> shape;  // output shape of the dequantize node
};

struct ExecEnv {
  std::map<std::string, ExecValue> constants;     // bound initializer values
  std::map<std::string, QuantBinding> quantized;  // quantized slots
  std::map<BaseRef, int> share_counts;            // uses per base vertex
};

struct ExecStats {
  size_t peak_value_bytes = 0;    // high-water mark of live double buffers
  size_t base_dequant_count = 0;  // dequantizations actually performed
  bool memo_clean = true;         // base memo empty when execution ended
};

struct ExecResult {
  std::map<std::string, Tensor> outputs;
  std::map<std::string, std::vector<double>> outputs_f64;
  ExecStats stats;
};

// Supplies initializer values that are not in env.constants, in the order
// the executor first needs them (streaming loads).
using InitializerProvider = std::function<ExecValue(const std::string&)>;

ExecResult execute(const ModelGraph& graph,
                   const std::map<std::string, Tensor>& inputs,
                   const ExecEnv& env,
                   const InitializerProvider& provider = nullptr);

}  // namespace deltastore
