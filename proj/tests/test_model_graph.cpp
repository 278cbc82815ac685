#include "deltastore/model_graph.hpp"

#include <set>

#include "deltastore/corpus.hpp"
#include "deltastore/errors.hpp"
#include "doctest.h"

using namespace deltastore;

namespace {

ModelGraph small_mlp() {
  CorpusSpec spec;
  spec.kind = CorpusSpec::Kind::kMlp;
  spec.widths = {4, 8, 2};
  spec.seed = 11;
  return generate_models(spec)[0].graph;
}

}  // namespace

TEST_SUITE_BEGIN("model_graph");

TEST_CASE("document round trip preserves structure") {
  const ModelGraph g = small_mlp();
  const std::string doc = serialize_graph_doc(g);
  const ModelGraph parsed = parse_graph_doc(doc);
  CHECK(serialize_graph_doc(parsed) == doc);
  CHECK(parsed.nodes.size() == g.nodes.size());
  CHECK(parsed.initializers.size() == g.initializers.size());
  CHECK(parsed.outputs == g.outputs);
}

TEST_CASE("topological order respects producers") {
  const ModelGraph g = small_mlp();
  const std::vector<size_t> order = g.topo_order();
  REQUIRE(order.size() == g.nodes.size());
  std::set<std::string> available;
  for (const TensorSig& sig : g.initializers) available.insert(sig.name);
  for (size_t idx : order) {
    for (const std::string& in : g.nodes[idx].inputs) {
      CHECK(available.contains(in));
    }
    if (!g.nodes[idx].output.empty()) available.insert(g.nodes[idx].output);
  }
}

TEST_CASE("validation rejects malformed graphs") {
  SUBCASE("cycle") {
    ModelGraph g;
    g.inputs = {{"x", {1, 1}}};
    g.outputs = {"b"};
    GraphNode in{.id = "in", .op = OpKind::kInput, .inputs = {}, .output = "x"};
    GraphNode n1{.id = "n1", .op = OpKind::kAdd, .inputs = {"x", "b"}, .output = "a"};
    GraphNode n2{.id = "n2", .op = OpKind::kRelu, .inputs = {"a"}, .output = "b"};
    GraphNode out{.id = "out", .op = OpKind::kOutput, .inputs = {"b"}, .output = ""};
    g.nodes = {in, n1, n2, out};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("cycle"), Error);
  }
  SUBCASE("bad arity") {
    ModelGraph g;
    g.inputs = {{"x", {1, 1}}};
    g.outputs = {"y"};
    GraphNode in{.id = "in", .op = OpKind::kInput, .inputs = {}, .output = "x"};
    GraphNode mm{.id = "mm", .op = OpKind::kMatMul, .inputs = {"x"}, .output = "y"};
    GraphNode out{.id = "out", .op = OpKind::kOutput, .inputs = {"y"}, .output = ""};
    g.nodes = {in, mm, out};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("expects 2 inputs"),
                         Error);
  }
  SUBCASE("value bound twice") {
    ModelGraph g;
    g.inputs = {{"x", {1, 1}}};
    g.outputs = {"x"};
    g.initializers = {{"x", {1}}};
    GraphNode in{.id = "in", .op = OpKind::kInput, .inputs = {}, .output = "x"};
    GraphNode out{.id = "out", .op = OpKind::kOutput, .inputs = {"x"}, .output = ""};
    g.nodes = {in, out};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("bound more than once"),
                         Error);
  }
  SUBCASE("undefined value") {
    ModelGraph g;
    g.inputs = {{"x", {1, 1}}};
    g.outputs = {"y"};
    GraphNode in{.id = "in", .op = OpKind::kInput, .inputs = {}, .output = "x"};
    GraphNode relu{.id = "r", .op = OpKind::kRelu, .inputs = {"ghost"}, .output = "y"};
    GraphNode out{.id = "out", .op = OpKind::kOutput, .inputs = {"y"}, .output = ""};
    g.nodes = {in, relu, out};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("undefined value"),
                         Error);
  }
  SUBCASE("missing Input node") {
    ModelGraph g;
    g.inputs = {{"x", {1, 1}}};
    g.outputs = {"x"};
    GraphNode out{.id = "out", .op = OpKind::kOutput, .inputs = {"x"}, .output = ""};
    g.nodes = {out};
    CHECK_THROWS_AS(g.validate(), Error);
  }
}

TEST_CASE("parse rejects foreign documents and versions") {
  CHECK_THROWS_AS(parse_graph_doc("not json at all"), Error);
  CHECK_THROWS_AS(parse_graph_doc("{\"format\":\"other\",\"version\":1}"),
                  Error);
  CHECK_THROWS_AS(
      parse_graph_doc(
          "{\"format\":\"dsgraph\",\"version\":99,\"nodes\":[]}"),
      UnsupportedVersion);
}

TEST_SUITE_END();
