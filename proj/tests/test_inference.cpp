#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include "gskgc/error.hpp"
#include "gskgc/inference.hpp"
#include "gskgc/io.hpp"

using namespace gskgc;

namespace {

// Replays a fixed list of generations, cycling, one per requested sequence.
class Scripted final : public Generator {
 public:
  explicit Scripted(std::vector<std::string> script) : script_(std::move(script)) {}
  std::vector<std::string> generate(const GenerationRequest& request) override {
    std::lock_guard lock(mutex_);
    ++calls;
    const int n = request.config.mode == DecodeMode::Greedy ? 1 : request.config.num_return_sequences;
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(script_[next_++ % script_.size()]);
    return out;
  }
  int calls = 0;

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
  std::mutex mutex_;
};

class Failing final : public Generator {
 public:
  std::vector<std::string> generate(const GenerationRequest&) override { throw EndpointError("down"); }
};

// Counting wrapper used to check which ids a resumed batch queries.
class Counting final : public Generator {
 public:
  explicit Counting(Generator& inner) : inner_(inner) {}
  std::vector<std::string> generate(const GenerationRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      ids.push_back(request.id);
    }
    return inner_.generate(request);
  }
  std::vector<std::uint64_t> ids;

 private:
  Generator& inner_;
  std::mutex mutex_;
};

std::filesystem::path temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gskgc_inf_" + name);
  std::filesystem::remove(p);
  return p;
}

// Independent re-implementation of the corruption schedule.
bool reference_corrupted(std::uint64_t id, double rate, std::uint64_t seed) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t state = mix(seed ^ mix(id + 0x9e3779b97f4a7c15ULL));
  state += 0x9e3779b97f4a7c15ULL;
  const double u = static_cast<double>(mix(state) >> 11) / 9007199254740992.0;
  return u < rate;
}

}  // namespace

TEST_CASE("generation config invariants") {
  const auto greedy = GenerationConfig::greedy();
  CHECK(greedy.mode == DecodeMode::Greedy);
  CHECK(greedy.num_return_sequences == 1);
  CHECK(greedy.top_k == 1);
  const auto sampled = GenerationConfig::sampled();
  CHECK(sampled.top_p == doctest::Approx(0.95));
  CHECK(sampled.top_k == 20);
  auto bad = greedy;
  bad.num_return_sequences = 2;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("perfect mock returns the gold answer") {
  MockOracle mock({{4, "Chandler"}}, {});
  const auto out = mock.generate({4, "prompt", GenerationConfig::greedy(), 0});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == "Chandler");
  CHECK_THROWS_AS(mock.generate({5, "prompt", GenerationConfig::greedy(), 0}), EndpointError);
  const auto pred = predict_top_k(mock, 4, "prompt", 1, GenerationConfig::sampled());
  CHECK(pred.answers == std::vector<std::string>{"chandler"});
}

TEST_CASE("corruption schedule matches an independent recomputation") {
  std::size_t corrupted = 0;
  for (std::uint64_t id = 0; id < 5000; ++id) {
    const bool c = MockOracle::corrupted(id, 0.3, 17);
    REQUIRE(c == reference_corrupted(id, 0.3, 17));
    corrupted += c;
  }
  CHECK(corrupted > 1350);
  CHECK(corrupted < 1650);

  std::unordered_map<std::uint64_t, std::string> gold;
  for (std::uint64_t id = 0; id < 200; ++id) gold[id] = "g" + std::to_string(id);
  MockOracle mock(gold, {0.3, 17});
  for (std::uint64_t id = 0; id < 200; ++id) {
    auto cfg = GenerationConfig::sampled(10);
    for (int attempt = 0; attempt < 3; ++attempt) {
      for (const auto& g : mock.generate({id, "", cfg, attempt})) {
        if (MockOracle::corrupted(id, 0.3, 17)) REQUIRE(g != gold[id]);
      }
    }
  }
}

TEST_CASE("mock spec parsing") {
  const auto o = MockOracle::parse_spec("corrupt=0.3,seed=7");
  CHECK(o.corruption == doctest::Approx(0.3));
  CHECK(o.seed == 7);
  CHECK(MockOracle::parse_spec("perfect").corruption == 0.0);
  CHECK_THROWS_AS(MockOracle::parse_spec("corrupt=1.5"), ValidationError);
  CHECK_THROWS_AS(MockOracle::parse_spec("corrupt=x"), ValidationError);
  CHECK_THROWS_AS(MockOracle::parse_spec("noise=1"), ValidationError);
}

TEST_CASE("answer extraction") {
  CHECK(extract_answer("\n  \"Phoenix\".\nBecause...") == "Phoenix");
  CHECK(extract_answer("**Chandler**") == "Chandler");
  CHECK(extract_answer("") == "");
}

TEST_CASE("top-k dedupes in first-occurrence order") {
  Scripted gen({"x", "x", "y", "z"});
  const auto pred = predict_top_k(gen, 1, "p", 3, GenerationConfig::sampled());
  CHECK(pred.answers == std::vector<std::string>{"x", "y", "z"});
  CHECK_FALSE(pred.short_list);
  CHECK(pred.generations == 4);
  CHECK(pred.raw_generations.size() == 4);
}

TEST_CASE("attempt cap yields a short list") {
  Scripted gen({"x", "y", "x", "y"});
  const auto pred = predict_top_k(gen, 1, "p", 3, GenerationConfig::sampled(2));
  CHECK(pred.answers == std::vector<std::string>{"x", "y"});
  CHECK(pred.short_list);
  CHECK(pred.generations == 9);
}

TEST_CASE("frequency ranking reorders by count") {
  Scripted gen({"a", "b", "b", "c", "b", "c"});
  const auto pred = predict_top_k(gen, 1, "p", 3, GenerationConfig::sampled(6), Ranking::Frequency);
  CHECK(pred.answers == std::vector<std::string>{"b", "c", "a"});
}

TEST_CASE("greedy issues exactly one generation") {
  Scripted gen({"x", "y"});
  const auto pred = predict_top_k(gen, 1, "p", 1, GenerationConfig::sampled(5));
  CHECK(gen.calls == 1);
  CHECK(pred.generations == 1);
  CHECK(pred.answers.size() == 1);
  CHECK_THROWS_AS(predict_top_k(gen, 1, "p", 0, GenerationConfig::sampled()), ValidationError);
}

TEST_CASE("endpoint failures become error markers") {
  Failing gen;
  const auto pred = predict_top_k(gen, 3, "p", 3, GenerationConfig::sampled());
  REQUIRE(pred.error);
  CHECK(pred.answers.empty());
  CHECK(prediction_line(pred) == R"({"id":3,"answers":[],"error":"down"})");

  const auto out = temp_file("fail.jsonl");
  std::vector<PromptInput> recs{{0, "a"}, {2, "b"}};
  const auto summary = run_batch(recs, gen, {}, out);
  CHECK(summary.errors == 2);
  const auto preds = read_predictions(out);
  REQUIRE(preds.size() == 2);
  CHECK(preds[1].error == "down");
  std::filesystem::remove(out);
}

TEST_CASE("empty batch writes only a header") {
  const auto out = temp_file("empty.jsonl");
  MockOracle mock({}, {});
  run_batch({}, mock, {}, out);
  const auto lines = read_lines(out);
  REQUIRE(lines.size() == 1);
  CHECK(nlohmann::json::parse(lines[0]).contains("_meta"));
  CHECK(read_predictions(out).empty());
  std::filesystem::remove(out);
}

TEST_CASE("resumed batch matches a one-shot batch") {
  std::unordered_map<std::uint64_t, std::string> gold;
  std::vector<PromptInput> recs;
  for (std::uint64_t id = 0; id < 40; ++id) {
    gold[id] = "Answer " + std::to_string(id);
    recs.push_back({id, "prompt " + std::to_string(id)});
  }
  MockOracle mock(gold, {0.3, 2});
  BatchOptions opts;
  opts.k = 3;
  opts.concurrency = 4;

  const auto once = temp_file("once.jsonl");
  run_batch(recs, mock, opts, once);

  const auto twice = temp_file("twice.jsonl");
  auto first = opts;
  first.limit = 15;
  CHECK(run_batch(recs, mock, first, twice).processed == 15);
  // A torn tail line from an interrupted writer is ignored on resume.
  { std::ofstream(twice, std::ios::app) << R"({"id":99,"answ)"; }
  Counting counting(mock);
  const auto summary = run_batch(recs, counting, opts, twice);
  CHECK(summary.skipped == 15);
  CHECK(summary.processed == 25);
  for (auto id : counting.ids) CHECK(id >= 15);

  CHECK(read_file(once) == read_file(twice));
  std::filesystem::remove(once);
  std::filesystem::remove(twice);
}

TEST_CASE("1000 perfect-mock records all contain the gold") {
  std::unordered_map<std::uint64_t, std::string> gold;
  std::vector<PromptInput> recs;
  for (std::uint64_t id = 0; id < 1000; ++id) {
    gold[id] = "Entity " + std::to_string(id);
    recs.push_back({id, "p"});
  }
  MockOracle mock(gold, {});
  BatchOptions opts;
  opts.k = 3;
  opts.concurrency = 8;
  const auto out = temp_file("thousand.jsonl");
  run_batch(recs, mock, opts, out);
  const auto preds = read_predictions(out);
  REQUIRE(preds.size() == 1000);
  for (const auto& p : preds) {
    REQUIRE(p.answers.size() == 3);
    REQUIRE(p.answers.front() == "entity " + std::to_string(p.id));
  }
  std::filesystem::remove(out);
}

TEST_CASE("HTTP generator against a local endpoint") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::mutex seen_mutex;
  std::string seen_auth, seen_body, seen_path;
  std::atomic<bool> malformed{false};
  server.Post(R"(/v1/chat/completions)", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(seen_mutex);
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      seen_path = req.path;
    }
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    if (malformed) {
      res.set_content(R"({"choices":[{"text":"no message"}]})", "application/json");
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Chandler"}},)"
                    R"({"message":{"role":"assistant","content":"Phoenix."}}]})",
                    "application/json");
  });
  server.Post(R"(/bad/chat/completions)", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("GSKGC_TEST_TOKEN", "secret", 1);
  HttpOptions opts;
  opts.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
  opts.token_env = "GSKGC_TEST_TOKEN";
  opts.initial_backoff = std::chrono::milliseconds(1);
  opts.max_retries = 2;
  HttpGenerator gen(opts);

  SUBCASE("retry then success") {
    auto cfg = GenerationConfig::sampled(2);
    const auto out = gen.generate({1, "Please complete", cfg, 0});
    CHECK(hits == 2);
    CHECK(out == std::vector<std::string>{"Chandler", "Phoenix."});
    std::lock_guard lock(seen_mutex);
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_path == "/v1/chat/completions");
    const auto body = nlohmann::json::parse(seen_body);
    CHECK(body.at("messages")[0].at("content") == "Please complete");
    CHECK(body.at("n") == 2);
    CHECK(body.at("top_p") == doctest::Approx(0.95));
    CHECK_FALSE(body.contains("top_k"));
  }
  SUBCASE("malformed reply is an endpoint error") {
    malformed = true;
    CHECK_THROWS_AS(gen.generate({1, "p", GenerationConfig::greedy(), 0}), EndpointError);
  }
  SUBCASE("client errors are not retried") {
    auto bad = opts;
    bad.base_url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
    HttpGenerator bad_gen(bad);
    CHECK_THROWS_AS(bad_gen.generate({1, "p", GenerationConfig::greedy(), 0}), EndpointError);
    CHECK(hits == 1);
  }
  SUBCASE("unreachable endpoint exhausts retries") {
    auto dead = opts;
    dead.base_url = "http://127.0.0.1:1/v1";
    dead.timeout = std::chrono::seconds(1);
    HttpGenerator dead_gen(dead);
    const auto pred = predict_top_k(dead_gen, 1, "p", 1, GenerationConfig::sampled());
    REQUIRE(pred.error);
    CHECK(pred.error->find("after retries") != std::string::npos);
  }

  server.stop();
  runner.join();
}

TEST_CASE("request body for greedy and top_k opt-in") {
  HttpOptions opts;
  opts.base_url = "http://localhost:8000/v1";
  opts.model = "m";
  opts.send_top_k = true;
  HttpGenerator gen(opts);
  const auto greedy = nlohmann::json::parse(gen.request_body({0, "p", GenerationConfig::greedy(), 0}));
  CHECK(greedy.at("temperature") == 0.0);
  CHECK(greedy.at("n") == 1);
  CHECK(greedy.at("top_k") == 1);
  CHECK(greedy.at("model") == "m");
  const auto sampled = nlohmann::json::parse(gen.request_body({0, "p", GenerationConfig::sampled(4), 0}));
  CHECK(sampled.at("top_k") == 20);
  CHECK(sampled.at("max_tokens") == 64);
  CHECK_THROWS_AS(HttpGenerator({.base_url = "localhost:8000"}), ValidationError);
  CHECK_THROWS_AS(HttpGenerator::parse_reply("not json"), EndpointError);
  CHECK_THROWS_AS(HttpGenerator::parse_reply(R"({"choices":[]})"), EndpointError);
}
