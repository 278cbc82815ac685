#pragma once
// Computation graph for stored models: a named-node DAG with tensor slots.
//
// Document format "dsgraph" v1: a JSON tree listing inputs, outputs,
// initializer signatures, the sidecar blob name, and the node list.
// Golden files under tests/golden pin the schema.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deltastore/tensor.hpp"

namespace deltastore {

enum class OpKind {
  kInput,
  kOutput,
  kMatMul,
  kAdd,
  kRelu,
  kSigmoid,
  kConstant,
  kDequantizeLinear,
};

const char* op_name(OpKind op);
OpKind op_from_name(const std::string& name);

struct GraphNode {
  std::string id;
  OpKind op = OpKind::kInput;
  std::vector<std::string> inputs;
  std::string output;            // empty for Output nodes
  std::optional<Tensor> value;   // Constant payload
};

struct TensorSig {
  std::string name;
  std::vector<uint64_t> shape;

  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return n;
  }
};

struct ModelGraph {
  std::string name;
  std::vector<TensorSig> inputs;
  std::vector<std::string> outputs;
  std::vector<TensorSig> initializers;
  std::string blob;  // sidecar tensor blob filename, may be empty
  std::vector<GraphNode> nodes;

  // Structural checks: unique ids, every value produced exactly once, op
  // arities respected, inputs resolvable, acyclic, declared outputs wired
  // to Output nodes.
  void validate() const;

  // Node evaluation order (indices into nodes). Throws on cycles.
  std::vector<size_t> topo_order() const;

  const TensorSig* find_initializer(const std::string& name) const;
};

std::string serialize_graph_doc(const ModelGraph& graph);
ModelGraph parse_graph_doc(const std::string& text);

}  // namespace deltastore
