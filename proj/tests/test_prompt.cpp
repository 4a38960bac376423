#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "gskgc/error.hpp"
#include "gskgc/prompt.hpp"
#include "random_graph.hpp"

using namespace gskgc;
using namespace gskgc::testing;

TEST_CASE("basic prompt with and without a description") {
  GraphBuilder b;
  b.add(Split::Test, "Waylon Jennings", "place of death", "Chandler");
  const auto kg = std::move(b).build();
  const auto q = build_queries(kg, Split::Test)[0];
  PromptConfig cfg;
  CHECK(render_basic(kg, q, cfg, "D") ==
        "Please complete this triple: (Waylon Jennings, place of death, ?). Waylon Jennings means D");
  CHECK(render_basic(kg, q, cfg) == "Please complete this triple: (Waylon Jennings, place of death, ?).");

  // Descriptions only reach the prompt when switched on.
  DescriptionTable desc;
  desc.set("Waylon Jennings", "D");
  CHECK(build_record(kg, q, cfg, &desc, "h").parts.basic.find("means") == std::string::npos);
  cfg.use_descriptions = true;
  CHECK(build_record(kg, q, cfg, &desc, "h").parts.basic.ends_with("Waylon Jennings means D"));
}

TEST_CASE("backward and temporal basic prompts") {
  const auto kg = toy_graph();
  const auto q = find_query(kg, Split::Train, "A", "r1", "B", Direction::Backward);
  CHECK(render_basic(kg, q, {}) == "Please complete this triple: (?, r1, B).");

  GraphBuilder tb(TripleFormat::Temporal);
  tb.add(Split::Test, "Iran", "Make statement", "Iraq", "2014-03-02");
  const auto tkg = std::move(tb).build();
  const auto tq = build_queries(tkg, Split::Test)[0];
  CHECK(render_basic(tkg, tq, {}) == "Please complete this triple: (Iran, Make statement, ?) at 2014-03-02.");
}

TEST_CASE("negative list rendering") {
  const auto kg = toy_graph();
  CHECK(render_negatives(kg, {kg.entity("B"), kg.entity("C")}) == "Please give an answer outside the list: [B, C]");
  CHECK(render_negatives(kg, {kg.entity("C")}) == "Please give an answer outside the list: [C]");
  CHECK(render_negatives(kg, {}).empty());
}

TEST_CASE("neighbor rendering") {
  const auto kg = toy_graph();
  const auto q = find_query(kg, Split::Test, "A", "r1", "E", Direction::Forward);
  const auto paths = context_paths(kg, q, 2);
  CHECK(render_neighbors(kg, q.anchor, {paths[0]}) == "The neighbors of A are as follows: (A, r2, D)");
  CHECK(render_neighbors(kg, q.anchor, paths) == "The neighbors of A are as follows: (A, r2, D), (A, r2, D, r3, E)");
  CHECK(render_neighbors(kg, q.anchor, {}).empty());
  CHECK(render_path(kg, context_paths(kg, q, 3)[2]) == "(A, r2, D, r3, E, inverse of r3, B)");

  GraphBuilder tb(TripleFormat::Temporal);
  tb.add(Split::Train, "X", "visit", "Y", "2014-01-01");
  tb.add(Split::Test, "X", "meet", "Z", "2014-02-01");
  const auto tkg = std::move(tb).build();
  const auto tq = build_queries(tkg, Split::Test)[0];
  CHECK(render_path(tkg, context_paths(tkg, tq, 1)[0]) == "(X, visit [2014-01-01], Y)");
}

TEST_CASE("full fixture prompt joins parts with spaces") {
  const auto kg = toy_graph();
  const auto q = find_query(kg, Split::Test, "A", "r1", "E", Direction::Forward);
  PromptConfig cfg;
  const auto rec = build_record(kg, q, cfg, nullptr, cfg.hash());
  CHECK(rec.prompt ==
        "Please complete this triple: (A, r1, ?). Please give an answer outside the list: [B, C] "
        "The neighbors of A are as follows: (A, r2, D)");
  CHECK(rec.answer == "E");
  CHECK(rec.config_hash == cfg.hash());
  CHECK_FALSE(rec.truncated);
}

TEST_CASE("record count is twice the split size") {
  const auto kg = random_graph(21, {});
  for (const auto split : {Split::Train, Split::Valid, Split::Test}) {
    const auto recs = build_dataset(kg, split, {});
    CHECK(recs.size() == 2 * kg.triples(split).size());
    for (std::size_t i = 1; i < recs.size(); ++i) REQUIRE(recs[i - 1].id < recs[i].id);
  }
}

TEST_CASE("ablations and zero budget reduce to the basic prompt") {
  const auto kg = random_graph(22, {});
  PromptConfig bare;
  bare.use_negatives = false;
  bare.use_neighbors = false;
  PromptConfig zero;
  zero.budget = 0;
  const auto a = build_dataset(kg, Split::Test, bare);
  const auto b = build_dataset(kg, Split::Test, zero);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prompt == a[i].parts.basic);
    CHECK(a[i].prompt == b[i].prompt);
  }

  PromptConfig no_neg;
  no_neg.use_negatives = false;
  PromptConfig no_nb;
  no_nb.use_neighbors = false;
  bool saw_neighbors = false, saw_negatives = false;
  for (const auto& r : build_dataset(kg, Split::Train, no_neg)) {
    REQUIRE(r.prompt.find(kNegativeHeader) == std::string::npos);
    saw_neighbors |= r.prompt.find(kNeighborHeaderPrefix) != std::string::npos;
  }
  for (const auto& r : build_dataset(kg, Split::Train, no_nb)) {
    REQUIRE(r.prompt.find(kNeighborHeaderPrefix) == std::string::npos);
    saw_negatives |= r.prompt.find(kNegativeHeader) != std::string::npos;
  }
  CHECK(saw_neighbors);
  CHECK(saw_negatives);
}

TEST_CASE("gold never appears in its own negative list") {
  const auto kg = random_graph(23, {});
  for (const auto split : {Split::Train, Split::Test}) {
    for (const auto& r : build_dataset(kg, split, {})) {
      for (auto e : r.context.negatives) REQUIRE(kg.entity_name(e) != r.answer);
    }
  }
}

TEST_CASE("dataset output is byte-identical across runs and thread counts") {
  const auto kg = random_graph(24, {.temporal = true});
  PromptConfig cfg;
  cfg.depth = 2;
  cfg.budget = 20;
  cfg.seed = 9;
  std::ostringstream a, b;
  const DatasetHeader h{"rand", Split::Test, cfg.hash(), cfg.seed, 0};
  write_pipeline_jsonl(a, h, build_dataset(kg, Split::Test, cfg, nullptr, 1));
  write_pipeline_jsonl(b, h, build_dataset(kg, Split::Test, cfg, nullptr, 4));
  CHECK(a.str() == b.str());
  cfg.seed = 10;
  std::ostringstream c;
  write_pipeline_jsonl(c, h, build_dataset(kg, Split::Test, cfg, nullptr, 1));
  CHECK(a.str() != c.str());
}

TEST_CASE("oversized prompts drop paths from the end and keep negatives") {
  const auto kg = toy_graph();
  const auto q = find_query(kg, Split::Test, "A", "r1", "E", Direction::Forward);
  PromptConfig cfg;
  cfg.depth = 3;
  const auto full = build_record(kg, q, cfg, nullptr, "h");
  REQUIRE(full.context.neighbors.size() == 3);

  cfg.max_chars = full.prompt.size() - 1;
  const auto cut = build_record(kg, q, cfg, nullptr, "h");
  CHECK(cut.truncated);
  CHECK(cut.prompt.size() <= cfg.max_chars);
  CHECK(cut.context.neighbors.size() == 2);
  CHECK(cut.parts.negatives == full.parts.negatives);
  CHECK(full.prompt.starts_with(cut.prompt));

  cfg.max_chars = 10;
  const auto tiny = build_record(kg, q, cfg, nullptr, "h");
  CHECK(tiny.truncated);
  CHECK(tiny.context.neighbors.empty());
  CHECK(tiny.parts.negatives == full.parts.negatives);
}

TEST_CASE("config parsing and hashing") {
  PromptConfig cfg;
  const auto base = cfg.hash();
  CHECK(base.size() == 16);
  cfg.apply("# comment\n[prompt]\np = 2\nM=40\n; other\nuse_negatives=false\nseed=5\n");
  CHECK(cfg.depth == 2);
  CHECK(cfg.budget == 40);
  CHECK_FALSE(cfg.use_negatives);
  CHECK(cfg.seed == 5);
  CHECK(cfg.hash() != base);
  CHECK(PromptConfig{}.hash() == base);

  CHECK_THROWS_AS(PromptConfig{}.apply("bogus=1"), ValidationError);
  CHECK_THROWS_AS(PromptConfig{}.apply("p=6"), ValidationError);
  CHECK_THROWS_AS(PromptConfig{}.apply("M=-1"), ValidationError);
  CHECK_THROWS_AS(PromptConfig{}.apply("use_neighbors=maybe"), ValidationError);
  CHECK_THROWS_AS(PromptConfig{}.apply("forward_template=no placeholders"), ValidationError);
}

TEST_CASE("pipeline and trainer JSONL schemas") {
  const auto kg = toy_graph();
  PromptConfig cfg;
  const auto recs = build_dataset(kg, Split::Test, cfg);
  std::ostringstream pipe, trainer;
  write_pipeline_jsonl(pipe, {"toy", Split::Test, cfg.hash(), 0, recs.size()}, recs);
  write_trainer_jsonl(trainer, recs);

  std::istringstream pin(pipe.str());
  std::string line;
  std::getline(pin, line);
  const auto meta = nlohmann::json::parse(line);
  CHECK(meta.at("_meta").at("config_hash") == cfg.hash());
  CHECK(meta.at("_meta").at("records") == 2);
  std::getline(pin, line);
  CHECK(line.starts_with(R"({"id":0,"split":"test","direction":"forward","prompt":)"));
  CHECK(line.ends_with(R"("answer":"E"})"));

  std::istringstream tin(trainer.str());
  std::size_t rows = 0;
  while (std::getline(tin, line)) {
    const auto j = nlohmann::ordered_json::parse(line);
    REQUIRE(j.size() == 3);
    auto it = j.begin();
    CHECK(it.key() == "instruction");
    CHECK((++it).key() == "input");
    CHECK(j["input"] == "");
    CHECK(j["instruction"] == recs[rows].prompt);
    CHECK(j["output"] == recs[rows].answer);
    ++rows;
  }
  CHECK(rows == recs.size());

  const auto path = std::filesystem::temp_directory_path() / "gskgc_pipe_test.jsonl";
  std::ofstream(path) << pipe.str();
  const auto rows_back = read_pipeline_jsonl(path);
  REQUIRE(rows_back.size() == 2);
  CHECK(rows_back[1].direction == Direction::Backward);
  CHECK(rows_back[1].answer == "A");
  std::filesystem::remove(path);
}

TEST_CASE("subgraph dump has one object per record") {
  const auto kg = toy_graph();
  PromptConfig cfg;
  const auto recs = build_dataset(kg, Split::Test, cfg);
  std::ostringstream out;
  write_subgraph_dump(out, kg, recs, cfg);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  CHECK(j.at("id") == 0);
  CHECK(j.contains("negatives"));
  CHECK(j.contains("paths"));
  CHECK(j.contains("merged"));
}
