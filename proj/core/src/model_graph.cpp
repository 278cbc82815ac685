#include "deltastore/model_graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "deltastore/errors.hpp"

namespace deltastore {

namespace {

using nlohmann::json;

constexpr int kDocVersion = 1;

struct OpInfo {
  OpKind op;
  const char* name;
  int arity;  // -1: unchecked
};

constexpr OpInfo kOps[] = {
    {OpKind::kInput, "Input", 0},
    {OpKind::kOutput, "Output", 1},
    {OpKind::kMatMul, "MatMul", 2},
    {OpKind::kAdd, "Add", 2},
    {OpKind::kRelu, "Relu", 1},
    {OpKind::kSigmoid, "Sigmoid", 1},
    {OpKind::kConstant, "Constant", 0},
    {OpKind::kDequantizeLinear, "DequantizeLinear", 1},
};

int op_arity(OpKind op) {
  for (const OpInfo& info : kOps) {
    if (info.op == op) return info.arity;
  }
  return -1;
}

}  // namespace

const char* op_name(OpKind op) {
  for (const OpInfo& info : kOps) {
    if (info.op == op) return info.name;
  }
  return "?";
}

OpKind op_from_name(const std::string& name) {
  for (const OpInfo& info : kOps) {
    if (name == info.name) return info.op;
  }
  throw Error("graph document: unknown op '" + name + "'");
}

const TensorSig* ModelGraph::find_initializer(const std::string& name) const {
  for (const TensorSig& sig : initializers) {
    if (sig.name == name) return &sig;
  }
  return nullptr;
}

void ModelGraph::validate() const {
  std::set<std::string> ids;
  std::set<std::string> produced;
  for (const TensorSig& sig : initializers) {
    if (sig.name.empty()) throw Error("graph: empty initializer name");
    if (!produced.insert(sig.name).second) {
      throw Error("graph: value '" + sig.name + "' bound more than once");
    }
    if (sig.shape.empty()) {
      throw Error("graph: initializer '" + sig.name + "' has no shape");
    }
  }
  for (const GraphNode& node : nodes) {
    if (node.id.empty()) throw Error("graph: node with empty id");
    if (!ids.insert(node.id).second) {
      throw Error("graph: duplicate node id '" + node.id + "'");
    }
    const int arity = op_arity(node.op);
    if (arity >= 0 && static_cast<int>(node.inputs.size()) != arity) {
      throw Error("graph: node '" + node.id + "' (" + op_name(node.op) +
                  ") expects " + std::to_string(arity) + " inputs, has " +
                  std::to_string(node.inputs.size()));
    }
    if (node.op == OpKind::kOutput) {
      if (!node.output.empty()) {
        throw Error("graph: Output node '" + node.id + "' must not produce a value");
      }
      continue;
    }
    if (node.output.empty()) {
      throw Error("graph: node '" + node.id + "' has no output name");
    }
    if (!produced.insert(node.output).second) {
      throw Error("graph: value '" + node.output + "' bound more than once");
    }
    if (node.op == OpKind::kConstant && !node.value.has_value()) {
      throw Error("graph: Constant node '" + node.id + "' has no value");
    }
  }
  // Input nodes must match declared inputs one-to-one.
  std::set<std::string> declared_inputs;
  for (const TensorSig& sig : inputs) declared_inputs.insert(sig.name);
  std::set<std::string> input_nodes;
  for (const GraphNode& node : nodes) {
    if (node.op == OpKind::kInput) input_nodes.insert(node.output);
  }
  if (input_nodes != declared_inputs) {
    throw Error("graph: Input nodes do not match declared inputs");
  }
  // Every referenced value must exist.
  for (const GraphNode& node : nodes) {
    for (const std::string& in : node.inputs) {
      if (!produced.contains(in)) {
        throw Error("graph: node '" + node.id + "' reads undefined value '" +
                    in + "'");
      }
    }
  }
  // Every declared output must feed an Output node.
  std::set<std::string> output_fed;
  for (const GraphNode& node : nodes) {
    if (node.op == OpKind::kOutput) output_fed.insert(node.inputs[0]);
  }
  for (const std::string& out : outputs) {
    if (!output_fed.contains(out)) {
      throw Error("graph: declared output '" + out + "' has no Output node");
    }
  }
  topo_order();  // throws on cycles
}

std::vector<size_t> ModelGraph::topo_order() const {
  std::map<std::string, size_t> producer;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].output.empty()) producer[nodes[i].output] = i;
  }
  std::set<std::string> source_values;
  for (const TensorSig& sig : initializers) source_values.insert(sig.name);

  std::vector<int> pending(nodes.size(), 0);
  std::vector<std::vector<size_t>> consumers(nodes.size());
  std::vector<size_t> ready;
  for (size_t i = 0; i < nodes.size(); ++i) {
    int deps = 0;
    for (const std::string& in : nodes[i].inputs) {
      auto it = producer.find(in);
      if (it != producer.end()) {
        ++deps;
        consumers[it->second].push_back(i);
      } else if (!source_values.contains(in)) {
        throw Error("graph: node '" + nodes[i].id + "' reads undefined value '" +
                    in + "'");
      }
    }
    pending[i] = deps;
    if (deps == 0) ready.push_back(i);
  }
  std::vector<size_t> order;
  order.reserve(nodes.size());
  for (size_t head = 0; head < ready.size(); ++head) {
    const size_t i = ready[head];
    order.push_back(i);
    for (size_t c : consumers[i]) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != nodes.size()) throw Error("graph: cycle detected");
  return order;
}

std::string serialize_graph_doc(const ModelGraph& graph) {
  json doc;
  doc["format"] = "dsgraph";
  doc["version"] = kDocVersion;
  doc["name"] = graph.name;
  doc["inputs"] = json::array();
  for (const TensorSig& sig : graph.inputs) {
    doc["inputs"].push_back({{"name", sig.name}, {"shape", sig.shape}});
  }
  doc["outputs"] = graph.outputs;
  doc["initializers"] = json::array();
  for (const TensorSig& sig : graph.initializers) {
    doc["initializers"].push_back({{"name", sig.name}, {"shape", sig.shape}});
  }
  if (!graph.blob.empty()) doc["blob"] = graph.blob;
  doc["nodes"] = json::array();
  for (const GraphNode& node : graph.nodes) {
    json n{{"id", node.id}, {"op", op_name(node.op)}};
    if (!node.inputs.empty()) n["inputs"] = node.inputs;
    if (!node.output.empty()) n["output"] = node.output;
    if (node.value) {
      n["shape"] = node.value->shape;
      n["data"] = node.value->data;
    }
    doc["nodes"].push_back(std::move(n));
  }
  return doc.dump(2) + "\n";
}

ModelGraph parse_graph_doc(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("graph document: invalid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "dsgraph") {
      throw Error("graph document: missing dsgraph format marker");
    }
    const int version = doc.value("version", -1);
    if (version != kDocVersion) {
      throw UnsupportedVersion("graph document version " +
                               std::to_string(version) + " is not supported");
    }
    ModelGraph g;
    g.name = doc.value("name", "");
    for (const json& j : doc.value("inputs", json::array())) {
      g.inputs.push_back(
          {j.at("name").get<std::string>(), j.at("shape").get<std::vector<uint64_t>>()});
    }
    g.outputs = doc.value("outputs", std::vector<std::string>{});
    for (const json& j : doc.value("initializers", json::array())) {
      g.initializers.push_back(
          {j.at("name").get<std::string>(), j.at("shape").get<std::vector<uint64_t>>()});
    }
    g.blob = doc.value("blob", "");
    for (const json& j : doc.at("nodes")) {
      GraphNode node;
      node.id = j.at("id").get<std::string>();
      node.op = op_from_name(j.at("op").get<std::string>());
      if (j.contains("inputs")) {
        node.inputs = j.at("inputs").get<std::vector<std::string>>();
      }
      node.output = j.value("output", "");
      if (j.contains("data")) {
        Tensor t;
        t.name = node.output;
        t.shape = j.at("shape").get<std::vector<uint64_t>>();
        t.data = j.at("data").get<std::vector<float>>();
        t.validate();
        node.value = std::move(t);
      }
      g.nodes.push_back(std::move(node));
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw Error(std::string("graph document: ") + e.what());
  }
}

}  // namespace deltastore
