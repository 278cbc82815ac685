#include "deltastore/corpus.hpp"

#include <bit>
#include <fstream>

#include "deltastore/errors.hpp"
#include "deltastore/io.hpp"

namespace deltastore {

uint64_t Rng::next_u64() {
  uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

uint64_t Rng::mix(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  Rng r(s);
  return r.next_u64();
}

namespace {

ModelGraph passthrough_graph(const std::string& name,
                             const std::vector<TensorSig>& initializers) {
  ModelGraph g;
  g.name = name;
  g.inputs = {{"x", {1, 1}}};
  g.outputs = {"x"};
  g.initializers = initializers;
  GraphNode in;
  in.id = "in0";
  in.op = OpKind::kInput;
  in.output = "x";
  GraphNode out;
  out.id = "out0";
  out.op = OpKind::kOutput;
  out.inputs = {"x"};
  g.nodes = {in, out};
  return g;
}

ModelGraph mlp_graph(const std::string& name,
                     const std::vector<uint64_t>& widths) {
  if (widths.size() < 2) {
    throw InvalidTensor("an MLP needs at least two layer widths");
  }
  ModelGraph g;
  g.name = name;
  g.inputs = {{"x", {1, widths[0]}}};
  GraphNode in;
  in.id = "in0";
  in.op = OpKind::kInput;
  in.output = "x";
  g.nodes.push_back(in);

  std::string cur = "x";
  for (size_t layer = 1; layer < widths.size(); ++layer) {
    const std::string w = "w" + std::to_string(layer);
    const std::string b = "b" + std::to_string(layer);
    g.initializers.push_back({w, {widths[layer - 1], widths[layer]}});
    g.initializers.push_back({b, {widths[layer]}});

    GraphNode mm;
    mm.id = "mm" + std::to_string(layer);
    mm.op = OpKind::kMatMul;
    mm.inputs = {cur, w};
    mm.output = "z" + std::to_string(layer);
    g.nodes.push_back(mm);

    GraphNode add;
    add.id = "add" + std::to_string(layer);
    add.op = OpKind::kAdd;
    add.inputs = {mm.output, b};
    add.output = "a" + std::to_string(layer);
    g.nodes.push_back(add);

    GraphNode act;
    const bool last = layer + 1 == widths.size();
    act.id = (last ? "sig" : "relu") + std::to_string(layer);
    act.op = last ? OpKind::kSigmoid : OpKind::kRelu;
    act.inputs = {add.output};
    act.output = (last ? "y" : "h" + std::to_string(layer));
    g.nodes.push_back(act);
    cur = act.output;
  }
  GraphNode out;
  out.id = "out0";
  out.op = OpKind::kOutput;
  out.inputs = {cur};
  g.nodes.push_back(out);
  g.outputs = {cur};
  return g;
}

std::vector<TensorSig> spec_signatures(const CorpusSpec& spec) {
  std::vector<TensorSig> sigs;
  if (spec.kind == CorpusSpec::Kind::kWeights) {
    for (size_t i = 0; i < spec.shapes.size(); ++i) {
      sigs.push_back({"t" + std::to_string(i), spec.shapes[i]});
    }
  } else {
    for (size_t layer = 1; layer < spec.widths.size(); ++layer) {
      sigs.push_back({"w" + std::to_string(layer),
                      {spec.widths[layer - 1], spec.widths[layer]}});
      sigs.push_back({"b" + std::to_string(layer), {spec.widths[layer]}});
    }
  }
  return sigs;
}

}  // namespace

std::vector<GeneratedModel> generate_models(const CorpusSpec& spec) {
  const std::vector<TensorSig> sigs = spec_signatures(spec);
  std::vector<GeneratedModel> models;
  models.reserve(static_cast<size_t>(spec.families) * spec.models_per_family);

  for (uint32_t f = 0; f < spec.families; ++f) {
    // The family base is reproducible independent of member count.
    std::vector<std::vector<float>> base(sigs.size());
    for (size_t t = 0; t < sigs.size(); ++t) {
      Rng rng(Rng::mix(spec.seed, Rng::mix(0xBA5Eull, f * 1000003ull + t)));
      base[t].resize(sigs[t].elem_count());
      for (float& v : base[t]) {
        v = static_cast<float>(
            rng.uniform(-spec.base_amplitude, spec.base_amplitude));
      }
    }
    for (uint32_t m = 0; m < spec.models_per_family; ++m) {
      GeneratedModel gm;
      gm.name = spec.name_prefix + std::to_string(f) + "_" + std::to_string(m);
      gm.graph = spec.kind == CorpusSpec::Kind::kWeights
                     ? passthrough_graph(gm.name, sigs)
                     : mlp_graph(gm.name, spec.widths);
      Rng member_rng(Rng::mix(spec.seed, Rng::mix(0x3A3Bull, f * 65537ull + m)));
      for (size_t t = 0; t < sigs.size(); ++t) {
        Tensor tensor;
        tensor.name = sigs[t].name;
        tensor.shape = sigs[t].shape;
        tensor.data = base[t];
        // Member 0 is the unperturbed base model.
        const bool perturb =
            m != 0 && member_rng.unit() < spec.perturb_fraction;
        if (perturb) {
          for (float& v : tensor.data) {
            v = static_cast<float>(static_cast<double>(v) +
                                   member_rng.uniform(-spec.sigma, spec.sigma));
          }
        }
        gm.tensors.push_back(std::move(tensor));
      }
      models.push_back(std::move(gm));
    }
  }
  return models;
}

void write_model_files(const GeneratedModel& model,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ModelGraph graph = model.graph;
  graph.blob = model.name + ".tensors";

  ByteWriter blob;
  for (const Tensor& t : model.tensors) {
    for (float v : t.data) blob.u32(std::bit_cast<uint32_t>(v));
  }
  write_file_atomic(dir / graph.blob, blob.data());

  const std::string doc = serialize_graph_doc(graph);
  write_file_atomic(dir / (model.name + ".json"),
                    std::span<const uint8_t>(
                        reinterpret_cast<const uint8_t*>(doc.data()),
                        doc.size()));
}

GeneratedModel read_model_files(const std::filesystem::path& json_path) {
  const std::vector<uint8_t> doc_bytes = read_file_bytes(json_path);
  GeneratedModel gm;
  gm.graph = parse_graph_doc(std::string(doc_bytes.begin(), doc_bytes.end()));
  gm.name = gm.graph.name.empty() ? json_path.stem().string() : gm.graph.name;
  if (gm.graph.blob.empty()) {
    throw InvalidTensor("model document has no tensor blob: " +
                        json_path.string());
  }
  const std::filesystem::path blob_path = json_path.parent_path() / gm.graph.blob;
  const std::vector<uint8_t> blob = read_file_bytes(blob_path);

  uint64_t expected = 0;
  for (const TensorSig& sig : gm.graph.initializers) {
    expected += sig.elem_count() * 4;
  }
  if (blob.size() != expected) {
    throw InvalidTensor("tensor blob size " + std::to_string(blob.size()) +
                        " does not match initializer signatures (" +
                        std::to_string(expected) + " bytes expected)");
  }
  size_t off = 0;
  for (const TensorSig& sig : gm.graph.initializers) {
    Tensor t;
    t.name = sig.name;
    t.shape = sig.shape;
    t.data.resize(sig.elem_count());
    for (float& v : t.data) {
      uint32_t bits = static_cast<uint32_t>(blob[off]) |
                      (static_cast<uint32_t>(blob[off + 1]) << 8) |
                      (static_cast<uint32_t>(blob[off + 2]) << 16) |
                      (static_cast<uint32_t>(blob[off + 3]) << 24);
      v = std::bit_cast<float>(bits);
      off += 4;
    }
    gm.tensors.push_back(std::move(t));
  }
  return gm;
}

}  // namespace deltastore
