#pragma once
// Deterministic synthetic corpora: families of fine-tuned model variants
// for storage experiments, and executable random MLPs for inference
// experiments. The same spec and seed always produce bitwise-identical
// models.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deltastore/model_graph.hpp"
#include "deltastore/tensor.hpp"

namespace deltastore {

// Deterministic splitmix64 stream; independent of platform and libstdc++
// distribution details.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double unit();  // [0, 1)
  double uniform(double lo, double hi);
  static uint64_t mix(uint64_t a, uint64_t b);

 private:
  uint64_t state_;
};

struct CorpusSpec {
  enum class Kind { kWeights, kMlp };
  Kind kind = Kind::kMlp;
  uint32_t families = 1;
  uint32_t models_per_family = 1;
  // kWeights: raw tensor shapes per model.
  std::vector<std::vector<uint64_t>> shapes;
  // kMlp: layer widths, e.g. {16, 32, 8} gives two MatMul+Add layers.
  std::vector<uint64_t> widths;
  double sigma = 0.02;            // per-weight perturbation half-width
  double perturb_fraction = 1.0;  // fraction of tensors perturbed per model
  uint64_t seed = 1;
  double base_amplitude = 0.056;  // family base weights ~ U(-a, a)
  std::string name_prefix = "m";
};

struct GeneratedModel {
  std::string name;
  ModelGraph graph;
  std::vector<Tensor> tensors;  // architecture order
};

// Model f*models_per_family + m is member m of family f; member 0 is the
// unperturbed family base, later members add U(-sigma, sigma) noise to a
// perturb_fraction subset of tensors.
std::vector<GeneratedModel> generate_models(const CorpusSpec& spec);

// Document + sidecar blob, as the CLI consumes them:
//   <name>.json     dsgraph document (blob field points at the sidecar)
//   <name>.tensors  raw little-endian float32, initializer order
void write_model_files(const GeneratedModel& model,
                       const std::filesystem::path& dir);
GeneratedModel read_model_files(const std::filesystem::path& json_path);

}  // namespace deltastore
