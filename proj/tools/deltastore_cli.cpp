// deltastore command line: save, load, infer, stats, corpus generation, and
// parameter sweeps over a store directory.
//
// Exit codes: 0 ok, 2 user error, 3 corrupt store, 4 tolerance too tight.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deltastore/compressor.hpp"
#include "deltastore/corpus.hpp"
#include "deltastore/loader.hpp"
#include "deltastore/pipeline.hpp"
#include "deltastore/stats.hpp"
#include "deltastore/store.hpp"

namespace {

using namespace deltastore;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUserError = 2;
constexpr int kExitCorruptStore = 3;
constexpr int kExitToleranceTooTight = 4;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

StoreConfig store_config() {
  StoreConfig cfg;
  if (const char* env = std::getenv("DELTASTORE_CACHE_BUDGET")) {
    try {
      cfg.index.cache_budget_bytes = std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidTensor("DELTASTORE_CACHE_BUDGET must be a byte count");
    }
  }
  return cfg;
}

LoadBits parse_bits(const std::string& bits) {
  if (bits == "FULL" || bits == "full") return LoadBits::full();
  try {
    return LoadBits::at(std::stoi(bits));
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw InvalidTensor("--bits expects FULL or an integer in [1, 32]");
  }
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string format_g3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

SaveRequest request_from_files(const std::filesystem::path& model_json,
                               double tolerance, double tau) {
  const GeneratedModel gm = read_model_files(model_json);
  SaveRequest req;
  req.model_name = gm.name;
  req.architecture = gm.graph;
  req.tensors = gm.tensors;
  req.tolerance = PrecisionTolerance(tolerance);
  req.threshold = SimilarityThreshold(tau);
  return req;
}

void print_save_report(const SaveReport& report, double tolerance,
                       double tau) {
  std::cout << "model_id=" << report.model_id << "\n";
  std::cout << "tolerance=" << format_g3(tolerance) << "\n";
  std::cout << "tau=" << format_g3(tau) << "\n";
  std::cout << "tensors=" << report.tensors.size() << "\n";
  std::cout << "new_vertices=" << report.new_vertex_count << "\n";
  std::cout << "original_bytes=" << report.original_bytes << "\n";
  std::cout << "stored_bytes=" << report.stored_bytes << "\n";
  std::cout << "amortized_index_bytes=" << format_g(report.amortized_index_bytes)
            << "\n";
  std::cout << "ratio=" << format_g(report.ratio) << "\n";
  std::map<int, int> hist;
  int inlined = 0;
  for (const TensorReport& t : report.tensors) {
    if (t.inlined) {
      ++inlined;
    } else {
      ++hist[t.nbit];
    }
  }
  for (const auto& [nbit, count] : hist) {
    std::cout << "nbit_hist[" << nbit << "]=" << count << "\n";
  }
  if (inlined > 0) std::cout << "inline_records=" << inlined << "\n";
}

std::map<std::string, Tensor> read_inputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidTensor("cannot open input file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InvalidTensor(std::string("input file is not valid JSON: ") +
                        e.what());
  }
  std::map<std::string, Tensor> inputs;
  for (const auto& [name, j] : doc.items()) {
    Tensor t;
    t.name = name;
    t.shape = j.at("shape").get<std::vector<uint64_t>>();
    t.data = j.at("data").get<std::vector<float>>();
    t.validate();
    inputs[name] = std::move(t);
  }
  return inputs;
}

int cmd_save(const std::string& store_dir, const std::string& model_json,
             double tolerance, double tau, int threads) {
  const SaveRequest req = request_from_files(model_json, tolerance, tau);
  Store store(store_dir, store_config());
  CompressOptions opts;
  opts.threads = threads;
  const double t0 = now_ms();
  const SaveReport report = compress_model(req, store, opts);
  const double elapsed = now_ms() - t0;
  std::cout << "model=" << req.model_name << "\n";
  print_save_report(report, tolerance, tau);
  std::cout << "save_ms=" << format_g(elapsed) << "\n";
  return kExitOk;
}

int cmd_load(const std::string& store_dir, const std::string& name,
             const std::string& bits) {
  Store store(store_dir, store_config());
  const LoadBits lb = parse_bits(bits);
  const double t0 = now_ms();
  const LoadedModel lm = load_model(store, name, lb);
  const double elapsed = now_ms() - t0;
  std::cout << "model=" << name << "\n";
  std::cout << "bits=" << (lb.is_full() ? "FULL" : std::to_string(lb.bits))
            << "\n";
  std::cout << "records=" << lm.entries.size() << "\n";
  std::cout << "resident_payload_bytes=" << lm.resident_payload_bytes() << "\n";
  std::cout << "load_ms=" << format_g(elapsed) << "\n";
  return kExitOk;
}

int cmd_infer(const std::string& store_dir, const std::string& name,
              const std::string& bits, const std::string& input_path,
              const std::string& output_path) {
  Store store(store_dir, store_config());
  const LoadBits lb = parse_bits(bits);
  const std::map<std::string, Tensor> inputs = read_inputs(input_path);

  PipelineOptions opts;
  opts.bits = lb;
  const double t0 = now_ms();
  const ExecResult result = pipelined_load_execute(store, name, inputs, opts);
  const double elapsed = now_ms() - t0;

  std::cout << "model=" << name << "\n";
  std::cout << "bits=" << (lb.is_full() ? "FULL" : std::to_string(lb.bits))
            << "\n";
  std::cout << "infer_ms=" << format_g(elapsed) << "\n";
  for (const auto& [out_name, tensor] : result.outputs) {
    std::cout << "output=" << out_name << " elems=" << tensor.data.size();
    const size_t preview = std::min<size_t>(tensor.data.size(), 4);
    for (size_t i = 0; i < preview; ++i) {
      std::cout << (i == 0 ? " values=" : ",")
                << format_g(tensor.data[i]);
    }
    std::cout << "\n";
  }
  if (!output_path.empty()) {
    json doc;
    for (const auto& [out_name, tensor] : result.outputs) {
      doc[out_name] = {{"shape", tensor.shape}, {"data", tensor.data}};
    }
    std::ofstream out(output_path);
    out << doc.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_stats(const std::string& store_dir) {
  Store store(store_dir, store_config());
  const StoreStats stats = compute_store_stats(store);
  std::cout << "models=" << stats.model_count << "\n";
  std::cout << "original_bytes=" << stats.original_bytes << "\n";
  std::cout << "page_bytes=" << stats.page_bytes << "\n";
  std::cout << "index_bytes=" << stats.index_bytes << "\n";
  std::cout << "arch_bytes=" << store.arch().stored_bytes() << "\n";
  std::cout << "delta_records=" << stats.delta_record_count << "\n";
  std::cout << "inline_records=" << stats.inline_record_count << "\n";
  std::cout << "bits_saved_sum=" << stats.bits_saved_sum << "\n";
  std::cout << "mean_bits_saved=" << format_g(stats.mean_bits_saved) << "\n";
  const double denom =
      static_cast<double>(stats.page_bytes) + static_cast<double>(stats.index_bytes);
  std::cout << "overall_ratio="
            << format_g(stats.original_bytes > 0 && denom > 0
                            ? static_cast<double>(stats.original_bytes) / denom
                            : 1.0)
            << "\n";
  std::vector<double> ratios;
  for (const ModelStats& m : stats.models) {
    std::cout << "model=" << m.name << " ratio=" << format_g(m.ratio) << "\n";
    ratios.push_back(m.ratio);
  }
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    auto pct = [&](double q) {
      const size_t i = static_cast<size_t>(q * (ratios.size() - 1));
      return ratios[i];
    };
    std::cout << "ratio_p10=" << format_g(pct(0.10)) << "\n";
    std::cout << "ratio_p50=" << format_g(pct(0.50)) << "\n";
    std::cout << "ratio_p90=" << format_g(pct(0.90)) << "\n";
  }
  return kExitOk;
}

int cmd_gen_corpus(const std::string& out_dir, const std::string& kind,
                   uint32_t families, uint32_t per_family,
                   const std::string& widths, const std::string& shapes,
                   double sigma, double fraction, uint64_t seed,
                   const std::string& prefix) {
  CorpusSpec spec;
  spec.families = families;
  spec.models_per_family = per_family;
  spec.sigma = sigma;
  spec.perturb_fraction = fraction;
  spec.seed = seed;
  spec.name_prefix = prefix;
  if (kind == "mlp") {
    spec.kind = CorpusSpec::Kind::kMlp;
    for (const auto& part : CLI::detail::split(widths, ',')) {
      spec.widths.push_back(std::stoull(part));
    }
    if (spec.widths.size() < 2) {
      throw InvalidTensor("--widths needs at least two comma-separated sizes");
    }
  } else if (kind == "weights") {
    spec.kind = CorpusSpec::Kind::kWeights;
    for (const auto& shape : CLI::detail::split(shapes, ',')) {
      std::vector<uint64_t> dims;
      for (const auto& d : CLI::detail::split(shape, 'x')) {
        dims.push_back(std::stoull(d));
      }
      if (dims.empty()) throw InvalidTensor("bad --shapes entry");
      spec.shapes.push_back(std::move(dims));
    }
    if (spec.shapes.empty()) {
      throw InvalidTensor("--shapes needs at least one entry like 64x64");
    }
  } else {
    throw InvalidTensor("--kind must be mlp or weights");
  }

  const std::vector<GeneratedModel> models = generate_models(spec);
  for (const GeneratedModel& gm : models) {
    write_model_files(gm, out_dir);
  }
  std::cout << "corpus_dir=" << out_dir << "\n";
  std::cout << "models=" << models.size() << "\n";
  std::cout << "seed=" << seed << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& corpus_dir, const std::string& param,
              const std::string& values_csv, const std::string& out_csv,
              double tolerance, double tau, int threads) {
  if (param != "tau" && param != "tolerance") {
    throw InvalidTensor("--param must be tau or tolerance");
  }
  std::vector<double> values;
  for (const auto& part : CLI::detail::split(values_csv, ',')) {
    values.push_back(std::stod(part));
  }
  if (values.empty()) throw InvalidTensor("--values must not be empty");

  std::vector<std::filesystem::path> model_docs;
  for (const auto& de : std::filesystem::directory_iterator(corpus_dir)) {
    if (de.path().extension() == ".json") model_docs.push_back(de.path());
  }
  std::sort(model_docs.begin(), model_docs.end());
  if (model_docs.empty()) {
    throw InvalidTensor("no model documents in " + corpus_dir);
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw IoError("cannot open " + out_csv);
    out = &file;
  }
  *out << "param,value,models,original_bytes,page_bytes,index_bytes,ratio,"
          "throughput_mbps\n";

  for (const double value : values) {
    // Each sweep point rebuilds a store from empty.
    const std::filesystem::path store_dir =
        std::filesystem::temp_directory_path() /
        ("deltastore-sweep-" + std::to_string(::getpid()) + "-" + param +
         "-" + format_g(value));
    std::filesystem::remove_all(store_dir);
    Store store(store_dir, store_config());
    const double p = param == "tolerance" ? value : tolerance;
    const double t = param == "tau" ? value : tau;
    const double t0 = now_ms();
    uint64_t original = 0;
    for (const auto& doc : model_docs) {
      const SaveRequest req = request_from_files(doc, p, t);
      CompressOptions opts;
      opts.threads = threads;
      original += compress_model(req, store, opts).original_bytes;
    }
    const double elapsed_s = (now_ms() - t0) / 1000.0;
    const StoreStats stats = compute_store_stats(store);
    const double stored = static_cast<double>(stats.page_bytes) +
                          static_cast<double>(stats.index_bytes);
    const double ratio =
        original > 0 && stored > 0 ? static_cast<double>(original) / stored : 1.0;
    const double mbps = elapsed_s > 0
                            ? static_cast<double>(original) / (1e6 * elapsed_s)
                            : 0.0;
    *out << param << "," << format_g(value) << "," << stats.model_count << ","
         << stats.original_bytes << "," << stats.page_bytes << ","
         << stats.index_bytes << "," << format_g(ratio) << ","
         << format_g(mbps) << "\n";
    std::filesystem::remove_all(store_dir);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltastore: deduplicated, quantized model storage"};
  app.require_subcommand(1);

  std::string store_dir;
  app.add_option("--store", store_dir, "Store directory");

  // save
  auto* save = app.add_subcommand("save", "Compress a model into the store");
  std::string model_json;
  double tolerance = kDefaultTolerance;
  double tau = kDefaultTau;
  int threads = 1;
  save->add_option("model", model_json, "Model document (.json)")->required();
  save->add_option("--tolerance", tolerance, "Per-element error bound");
  save->add_option("--tau", tau, "Similarity threshold");
  save->add_option("--threads", threads, "Compression worker threads");

  // load
  auto* load = app.add_subcommand("load", "Load a model and report stats");
  std::string model_name;
  std::string bits = "8";
  load->add_option("name", model_name, "Model name")->required();
  load->add_option("--bits", bits, "Delta bit width (integer or FULL)");

  // infer
  auto* infer = app.add_subcommand("infer", "Run inference on a stored model");
  std::string input_path;
  std::string output_path;
  infer->add_option("name", model_name, "Model name")->required();
  infer->add_option("--input", input_path, "JSON file of named input tensors")
      ->required();
  infer->add_option("--output", output_path, "Write outputs as JSON");
  infer->add_option("--bits", bits, "Delta bit width (integer or FULL)");

  // stats
  auto* stats = app.add_subcommand("stats", "Store-wide storage report");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  std::string out_dir;
  std::string kind = "mlp";
  uint32_t families = 1;
  uint32_t per_family = 1;
  std::string widths = "16,32,8";
  std::string shapes;
  double sigma = 0.02;
  double fraction = 1.0;
  uint64_t seed = 1;
  std::string prefix = "m";
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--kind", kind, "mlp or weights");
  gen->add_option("--families", families, "Family count");
  gen->add_option("--per-family", per_family, "Models per family");
  gen->add_option("--widths", widths, "MLP layer widths, comma separated");
  gen->add_option("--shapes", shapes, "Tensor shapes, e.g. 64x64,2048");
  gen->add_option("--sigma", sigma, "Perturbation half-width");
  gen->add_option("--fraction", fraction, "Fraction of tensors perturbed");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--prefix", prefix, "Model name prefix");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Rebuild the store per parameter value");
  std::string corpus_dir;
  std::string param = "tau";
  std::string values_csv;
  std::string out_csv;
  sweep->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  sweep->add_option("--param", param, "tau or tolerance");
  sweep->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep->add_option("--out", out_csv, "CSV output path (default stdout)");
  sweep->add_option("--tolerance", tolerance, "Fixed tolerance while sweeping tau");
  sweep->add_option("--tau", tau, "Fixed tau while sweeping tolerance");
  sweep->add_option("--threads", threads, "Compression worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUserError;
  }

  try {
    auto need_store = [&]() -> const std::string& {
      if (store_dir.empty()) {
        throw InvalidTensor("--store is required for this subcommand");
      }
      return store_dir;
    };
    if (save->parsed()) {
      return cmd_save(need_store(), model_json, tolerance, tau, threads);
    }
    if (load->parsed()) return cmd_load(need_store(), model_name, bits);
    if (infer->parsed()) {
      return cmd_infer(need_store(), model_name, bits, input_path, output_path);
    }
    if (stats->parsed()) return cmd_stats(need_store());
    if (gen->parsed()) {
      return cmd_gen_corpus(out_dir, kind, families, per_family, widths,
                            shapes, sigma, fraction, seed, prefix);
    }
    if (sweep->parsed()) {
      return cmd_sweep(corpus_dir, param, values_csv, out_csv, tolerance, tau,
                       threads);
    }
    std::cerr << "error: no subcommand\n";
    return kExitUserError;
  } catch (const ToleranceTooTight& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitToleranceTooTight;
  } catch (const CorruptStore& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorruptStore;
  } catch (const UnsupportedVersion& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorruptStore;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorruptStore;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  }
}
