#include "deltastore/executor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "deltastore/errors.hpp"

namespace deltastore {

ExecValue ExecValue::from_tensor(const Tensor& t) {
  auto data = std::make_shared<std::vector<double>>(t.data.begin(), t.data.end());
  return ExecValue{t.shape, std::move(data)};
}

Tensor ExecValue::to_tensor(const std::string& name) const {
  Tensor t;
  t.name = name;
  t.shape = shape;
  t.data.reserve(data->size());
  for (double v : *data) t.data.push_back(static_cast<float>(v));
  return t;
}

namespace {

class Execution {
 public:
  Execution(const ModelGraph& graph, const std::map<std::string, Tensor>& inputs,
            const ExecEnv& env, const InitializerProvider& provider)
      : graph_(graph), inputs_(inputs), env_(env), provider_(provider),
        share_left_(env.share_counts) {}

  ExecResult run();

 private:
  [[noreturn]] void fail(const GraphNode& node, const std::string& msg) const {
    throw ShapeMismatch("node '" + node.id + "': " + msg);
  }

  const ExecValue& resolve(const GraphNode& node, const std::string& name);
  void eval(const GraphNode& node);
  ExecValue dequantize(const QuantBinding& binding);

  void account();  // refresh live/peak byte accounting
  void retain(const std::string& name, ExecValue value);
  void release_dead(const std::string& name);

  const ModelGraph& graph_;
  const std::map<std::string, Tensor>& inputs_;
  const ExecEnv& env_;
  const InitializerProvider& provider_;

  std::map<std::string, ExecValue> values_;
  std::map<std::string, int> uses_left_;
  std::map<BaseRef, ExecValue> memo_;
  std::map<BaseRef, int> share_left_;
  ExecResult result_;
};

void Execution::account() {
  std::set<const std::vector<double>*> seen;
  size_t live = 0;
  for (const auto& [name, v] : values_) {
    if (v.data && seen.insert(v.data.get()).second) live += v.data->size() * 8;
  }
  for (const auto& [ref, v] : memo_) {
    if (v.data && seen.insert(v.data.get()).second) live += v.data->size() * 8;
  }
  result_.stats.peak_value_bytes = std::max(result_.stats.peak_value_bytes, live);
}

void Execution::retain(const std::string& name, ExecValue value) {
  values_[name] = std::move(value);
  account();
}

void Execution::release_dead(const std::string& name) {
  auto uses = uses_left_.find(name);
  if (uses == uses_left_.end()) return;
  if (--uses->second <= 0) values_.erase(name);
}

const ExecValue& Execution::resolve(const GraphNode& node,
                                    const std::string& name) {
  auto it = values_.find(name);
  if (it != values_.end()) return it->second;
  auto cit = env_.constants.find(name);
  if (cit != env_.constants.end()) return cit->second;
  if (provider_ && graph_.find_initializer(name)) {
    values_[name] = provider_(name);
    account();
    return values_[name];
  }
  fail(node, "no value bound for input '" + name + "'");
}

ExecValue Execution::dequantize(const QuantBinding& binding) {
  if (binding.kind == QuantBinding::Kind::kBase) {
    auto hit = memo_.find(binding.ref);
    ExecValue value;
    if (hit != memo_.end()) {
      value = ExecValue{binding.shape, hit->second.data};
    } else {
      auto data = std::make_shared<std::vector<double>>(
          dequantize_base_f64(*binding.base));
      value = ExecValue{binding.shape, std::move(data)};
      ++result_.stats.base_dequant_count;
      auto left = share_left_.find(binding.ref);
      if (left != share_left_.end() && left->second > 1) {
        memo_[binding.ref] = ExecValue{{value.elem_count()}, value.data};
      }
    }
    auto left = share_left_.find(binding.ref);
    if (left != share_left_.end() && --left->second <= 0) {
      memo_.erase(binding.ref);
    }
    return value;
  }
  auto data =
      std::make_shared<std::vector<double>>(dequantize_delta(*binding.delta));
  return ExecValue{binding.shape, std::move(data)};
}

void Execution::eval(const GraphNode& node) {
  switch (node.op) {
    case OpKind::kInput: {
      auto it = inputs_.find(node.output);
      if (it == inputs_.end()) fail(node, "missing input tensor '" + node.output + "'");
      retain(node.output, ExecValue::from_tensor(it->second));
      return;
    }
    case OpKind::kOutput: {
      const ExecValue& v = resolve(node, node.inputs[0]);
      result_.outputs_f64[node.inputs[0]] = *v.data;
      result_.outputs[node.inputs[0]] = v.to_tensor(node.inputs[0]);
      release_dead(node.inputs[0]);
      return;
    }
    case OpKind::kConstant: {
      retain(node.output, ExecValue::from_tensor(*node.value));
      return;
    }
    case OpKind::kDequantizeLinear: {
      auto it = env_.quantized.find(node.inputs[0]);
      if (it == env_.quantized.end()) {
        fail(node, "no quantized payload bound for '" + node.inputs[0] + "'");
      }
      retain(node.output, dequantize(it->second));
      return;
    }
    case OpKind::kMatMul: {
      const ExecValue& a = resolve(node, node.inputs[0]);
      const ExecValue& b = resolve(node, node.inputs[1]);
      if (a.shape.size() != 2 || b.shape.size() != 2) {
        fail(node, "MatMul expects rank-2 operands");
      }
      const uint64_t m = a.shape[0], k = a.shape[1];
      const uint64_t k2 = b.shape[0], n = b.shape[1];
      if (k != k2) {
        fail(node, "inner dimensions differ: " + std::to_string(k) + " vs " +
                       std::to_string(k2));
      }
      auto out = std::make_shared<std::vector<double>>(m * n, 0.0);
      const std::vector<double>& A = *a.data;
      const std::vector<double>& B = *b.data;
      for (uint64_t i = 0; i < m; ++i) {
        for (uint64_t j = 0; j < n; ++j) {
          double sum = 0.0;
          for (uint64_t l = 0; l < k; ++l) {
            sum += A[i * k + l] * B[l * n + j];
          }
          (*out)[i * n + j] = sum;
        }
      }
      ExecValue v{{m, n}, std::move(out)};
      release_dead(node.inputs[0]);
      release_dead(node.inputs[1]);
      retain(node.output, std::move(v));
      return;
    }
    case OpKind::kAdd: {
      const ExecValue& a = resolve(node, node.inputs[0]);
      const ExecValue& b = resolve(node, node.inputs[1]);
      ExecValue v;
      if (a.shape == b.shape || a.elem_count() == b.elem_count()) {
        // Same element count: elementwise; the left operand's shape wins
        // unless it is flat and the right is not (reconstruction adds a
        // flat base to a shaped delta).
        const std::vector<double>& A = *a.data;
        const std::vector<double>& B = *b.data;
        auto out = std::make_shared<std::vector<double>>(A.size());
        for (size_t i = 0; i < A.size(); ++i) (*out)[i] = A[i] + B[i];
        v = ExecValue{a.shape.size() >= b.shape.size() ? a.shape : b.shape,
                      std::move(out)};
      } else if (a.shape.size() == 2 && b.shape.size() == 1 &&
                 b.shape[0] == a.shape[1]) {
        // Bias broadcast over rows.
        const uint64_t m = a.shape[0], n = a.shape[1];
        const std::vector<double>& A = *a.data;
        const std::vector<double>& B = *b.data;
        auto out = std::make_shared<std::vector<double>>(m * n);
        for (uint64_t i = 0; i < m; ++i) {
          for (uint64_t j = 0; j < n; ++j) {
            (*out)[i * n + j] = A[i * n + j] + B[j];
          }
        }
        v = ExecValue{{m, n}, std::move(out)};
      } else {
        fail(node, "Add operands are neither same-size nor matrix+bias");
      }
      release_dead(node.inputs[0]);
      release_dead(node.inputs[1]);
      retain(node.output, std::move(v));
      return;
    }
    case OpKind::kRelu:
    case OpKind::kSigmoid: {
      const ExecValue& a = resolve(node, node.inputs[0]);
      auto out = std::make_shared<std::vector<double>>(a.data->size());
      if (node.op == OpKind::kRelu) {
        for (size_t i = 0; i < out->size(); ++i) {
          (*out)[i] = (*a.data)[i] > 0.0 ? (*a.data)[i] : 0.0;
        }
      } else {
        for (size_t i = 0; i < out->size(); ++i) {
          (*out)[i] = 1.0 / (1.0 + std::exp(-(*a.data)[i]));
        }
      }
      ExecValue v{a.shape, std::move(out)};
      release_dead(node.inputs[0]);
      retain(node.output, std::move(v));
      return;
    }
  }
  fail(node, "unsupported op");
}

ExecResult Execution::run() {
  // Count consumers so intermediates are dropped after their last use.
  for (const GraphNode& node : graph_.nodes) {
    for (const std::string& in : node.inputs) ++uses_left_[in];
  }
  for (const size_t i : graph_.topo_order()) {
    eval(graph_.nodes[i]);
    account();
  }
  result_.stats.memo_clean = memo_.empty();
  return std::move(result_);
}

}  // namespace

ExecResult execute(const ModelGraph& graph,
                   const std::map<std::string, Tensor>& inputs,
                   const ExecEnv& env, const InitializerProvider& provider) {
  Execution exec(graph, inputs, env, provider);
  return exec.run();
}

}  // namespace deltastore
