#include "gskgc/inference.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "gskgc/error.hpp"
#include "gskgc/eval.hpp"
#include "gskgc/io.hpp"
#include "gskgc/rng.hpp"

namespace gskgc {

using ordered_json = nlohmann::ordered_json;

// Config -------------------------------------------------------------------

GenerationConfig GenerationConfig::greedy() {
  GenerationConfig cfg;
  cfg.mode = DecodeMode::Greedy;
  cfg.top_p = 1.0;
  cfg.top_k = 1;
  cfg.num_return_sequences = 1;
  cfg.temperature = 0.0;
  return cfg;
}

GenerationConfig GenerationConfig::sampled(int num_return_sequences) {
  GenerationConfig cfg;
  cfg.num_return_sequences = num_return_sequences;
  return cfg;
}

void GenerationConfig::validate() const {
  if (num_return_sequences < 1) throw ValidationError("num_return_sequences must be >= 1");
  if (mode == DecodeMode::Greedy && num_return_sequences != 1) {
    throw ValidationError("greedy decoding returns exactly one sequence");
  }
  if (top_p <= 0.0 || top_p > 1.0) throw ValidationError("top_p must be in (0, 1]");
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
}

// Mock ---------------------------------------------------------------------

MockOracle::MockOracle(std::unordered_map<std::uint64_t, std::string> gold, Options options)
    : gold_(std::move(gold)), options_(options) {
  if (options_.corruption < 0.0 || options_.corruption > 1.0) {
    throw ValidationError("mock corruption rate must be in [0, 1]");
  }
}

MockOracle::Options MockOracle::parse_spec(std::string_view spec) {
  Options opts;
  if (spec.empty() || spec == "perfect") return opts;
  while (!spec.empty()) {
    const auto comma = spec.find(',');
    auto item = spec.substr(0, comma);
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    if (item == "perfect") continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ValidationError("bad mock spec item '" + std::string(item) + "'");
    const auto key = item.substr(0, eq);
    const auto value = std::string(item.substr(eq + 1));
    try {
      if (key == "corrupt" || key == "corruption") {
        std::size_t used = 0;
        opts.corruption = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } else if (key == "seed") {
        std::size_t used = 0;
        opts.seed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } else {
        throw ValidationError("unknown mock spec key '" + std::string(key) + "'");
      }
    } catch (const std::logic_error&) {
      throw ValidationError("bad mock spec value '" + value + "'");
    }
  }
  if (opts.corruption < 0.0 || opts.corruption > 1.0) throw ValidationError("mock corruption rate must be in [0, 1]");
  return opts;
}

bool MockOracle::corrupted(std::uint64_t id, double rate, std::uint64_t seed) {
  auto rng = SplitMix64::derive(seed, id);
  return rng.uniform01() < rate;
}

std::vector<std::string> MockOracle::generate(const GenerationRequest& request) {
  auto it = gold_.find(request.id);
  if (it == gold_.end()) throw EndpointError("mock oracle has no answer for id " + std::to_string(request.id));
  const bool bad = corrupted(request.id, options_.corruption, options_.seed);
  const int n = request.config.mode == DecodeMode::Greedy ? 1 : request.config.num_return_sequences;
  std::vector<std::string> out;
  for (int j = 0; j < n; ++j) {
    const auto index = static_cast<std::uint64_t>(request.attempt) * n + j;
    if (!bad && index == 0) {
      out.push_back(it->second);
    } else {
      out.push_back("mock distractor " + std::to_string(bad ? index + 1 : index));
    }
  }
  return out;
}

// HTTP ---------------------------------------------------------------------

HttpGenerator::HttpGenerator(HttpOptions options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpGenerator::request_body(const GenerationRequest& request) const {
  const auto& cfg = request.config;
  ordered_json body;
  body["model"] = options_.model;
  body["messages"] = ordered_json::array({ordered_json{{"role", "user"}, {"content", request.prompt}}});
  if (cfg.mode == DecodeMode::Greedy) {
    body["temperature"] = 0.0;
    body["n"] = 1;
    if (options_.send_top_k) body["top_k"] = 1;
  } else {
    body["temperature"] = cfg.temperature;
    body["top_p"] = cfg.top_p;
    body["n"] = cfg.num_return_sequences;
    if (options_.send_top_k) body["top_k"] = cfg.top_k;
  }
  body["max_tokens"] = cfg.max_new_tokens;
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<std::string> HttpGenerator::parse_reply(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    std::vector<std::string> out;
    for (const auto& choice : j.at("choices")) out.push_back(choice.at("message").at("content").get<std::string>());
    if (out.empty()) throw EndpointError("endpoint reply has no choices");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("malformed endpoint reply: ") + e.what());
  }
}

std::vector<std::string> HttpGenerator::generate(const GenerationRequest& request) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  httplib::Headers headers;
  if (const char* token = std::getenv(options_.token_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto body = request_body(request);
  const auto path = path_prefix_ + "/chat/completions";

  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_reply(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    // Client errors other than rate limiting will not improve on retry.
    if (res->status >= 400 && res->status < 500 && res->status != 408 && res->status != 429) break;
  }
  throw EndpointError("endpoint failed after retries: " + last_error);
}

// Answers ------------------------------------------------------------------

std::string extract_answer(std::string_view generation) {
  while (!generation.empty() && std::isspace(static_cast<unsigned char>(generation.front()))) {
    generation.remove_prefix(1);
  }
  const auto nl = generation.find('\n');
  auto line = generation.substr(0, nl);
  auto strip = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\'' || c == '`' || c == '.' ||
           c == ',' || c == ';' || c == ':' || c == '!' || c == '*';
  };
  while (!line.empty() && strip(line.front())) line.remove_prefix(1);
  while (!line.empty() && strip(line.back())) line.remove_suffix(1);
  return std::string(line);
}

Prediction predict_top_k(Generator& generator, std::uint64_t id, std::string_view prompt, int k,
                         const GenerationConfig& sampled_config, Ranking ranking) {
  if (k < 1) throw ValidationError("k must be >= 1");
  Prediction pred;
  pred.id = id;
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::string> order;
  std::unordered_map<std::string, int> counts;
  auto absorb = [&](const std::vector<std::string>& gens) {
    for (const auto& g : gens) {
      pred.raw_generations.push_back(g);
      auto answer = normalize_answer(extract_answer(g));
      if (answer.empty()) continue;
      if (counts[answer]++ == 0) order.push_back(std::move(answer));
    }
  };

  try {
    if (k == 1) {
      absorb(generator.generate({id, prompt, GenerationConfig::greedy(), 0}));
      pred.generations = 1;
    } else {
      auto cfg = sampled_config;
      cfg.mode = DecodeMode::Sampled;
      cfg.validate();
      const int cap = 3 * k;
      for (int attempt = 0; pred.generations < cap && static_cast<int>(order.size()) < k; ++attempt) {
        cfg.num_return_sequences = std::min(sampled_config.num_return_sequences, cap - pred.generations);
        absorb(generator.generate({id, prompt, cfg, attempt}));
        pred.generations += cfg.num_return_sequences;
      }
    }
  } catch (const EndpointError& e) {
    pred.error = e.what();
  }

  if (ranking == Ranking::Frequency) {
    // Stable: ties keep first-occurrence order.
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) { return counts[a] > counts[b]; });
  }
  if (static_cast<int>(order.size()) > k) order.resize(k);
  pred.answers = std::move(order);
  pred.short_list = !pred.error && static_cast<int>(pred.answers.size()) < k;
  pred.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return pred;
}

// Prediction files ---------------------------------------------------------

std::string prediction_line(const Prediction& p) {
  ordered_json j;
  j["id"] = p.id;
  j["answers"] = p.answers;
  if (p.error) j["error"] = *p.error;
  if (p.short_list) j["short"] = true;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace {

std::string batch_header(const BatchOptions& options) {
  ordered_json meta;
  meta["kind"] = "predictions";
  meta["k"] = options.k;
  meta["ranking"] = options.ranking == Ranking::Frequency ? "frequency" : "first_occurrence";
  ordered_json head;
  head[std::string(kMetaKey)] = meta;
  return head.dump();
}

}  // namespace

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains(kMetaKey)) continue;
      Prediction p;
      p.id = j.at("id").get<std::uint64_t>();
      p.answers = j.at("answers").get<std::vector<std::string>>();
      if (j.contains("error") && !j["error"].is_null()) p.error = j["error"].get<std::string>();
      p.short_list = j.value("short", false);
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

BatchSummary run_batch(std::span<const PromptInput> records, Generator& generator, const BatchOptions& options,
                       const std::filesystem::path& out) {
  if (options.k < 1) throw ValidationError("k must be >= 1");
  BatchSummary summary;
  summary.total = records.size();

  // id -> serialized line, from any previous partial run.
  std::map<std::uint64_t, std::string> done;
  if (std::filesystem::exists(out)) {
    std::size_t line_no = 0;
    for (const auto& line : read_lines(out)) {
      ++line_no;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        continue;  // torn tail line from an interrupted run
      }
      if (j.contains(kMetaKey) || !j.contains("id")) continue;
      done.emplace(j["id"].get<std::uint64_t>(), line);
    }
  }

  std::vector<const PromptInput*> todo;
  for (const auto& r : records) {
    if (done.contains(r.id)) {
      ++summary.skipped;
    } else if (options.limit == 0 || todo.size() < options.limit) {
      todo.push_back(&r);
    }
  }

  const auto header = batch_header(options);
  {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    const bool fresh = !std::filesystem::exists(out);
    std::ofstream sink(out, std::ios::app);
    if (!sink) throw IoError("cannot open " + out.string());
    if (fresh) sink << header << '\n';
    std::mutex sink_mutex;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        auto pred = predict_top_k(generator, todo[i]->id, todo[i]->prompt, options.k, options.config, options.ranking);
        auto line = prediction_line(pred);
        std::lock_guard lock(sink_mutex);
        sink << line << '\n';
        sink.flush();
        ++summary.processed;
        if (pred.error) ++summary.errors;
        if (pred.short_list) ++summary.short_lists;
        done.emplace(pred.id, std::move(line));
      }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(options.concurrency, static_cast<unsigned>(todo.size())));
    if (threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    }
  }

  // Compact: header then lines sorted by id, so resumed runs match one-shot runs.
  std::string content = header + "\n";
  for (const auto& [id, line] : done) content += line + "\n";
  write_file_atomic(out, content);
  return summary;
}

}  // namespace gskgc
