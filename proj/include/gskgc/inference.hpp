#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gskgc {

enum class DecodeMode { Greedy, Sampled };

struct GenerationConfig {
  DecodeMode mode = DecodeMode::Sampled;
  double top_p = 0.95;
  int top_k = 20;
  int num_return_sequences = 1;
  int max_new_tokens = 64;
  double temperature = 1.0;

  /// Sampling off, top-k 1, one sequence.
  static GenerationConfig greedy();
  static GenerationConfig sampled(int num_return_sequences = 1);

  /// Greedy implies a single sequence.
  void validate() const;
};

struct GenerationRequest {
  std::uint64_t id = 0;
  std::string_view prompt;
  GenerationConfig config;
  /// Zero-based index of this call for the record; lets stateless
  /// generators vary their output across repeated sampling rounds.
  int attempt = 0;
};

/// Source of generations. Implementations throw EndpointError on failure.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
};

/// Deterministic stand-in for a model. Returns the gold answer first unless
/// the record's id falls in the corrupted fraction, in which case only
/// distractors are produced. Pure and reentrant.
class MockOracle final : public Generator {
 public:
  struct Options {
    double corruption = 0.0;
    std::uint64_t seed = 0;
  };

  MockOracle(std::unordered_map<std::uint64_t, std::string> gold, Options options);

  /// Parses `perfect` or comma-separated `corrupt=<rate>`, `seed=<n>`.
  static Options parse_spec(std::string_view spec);

  /// Whether `id` is corrupted under (rate, seed).
  static bool corrupted(std::uint64_t id, double rate, std::uint64_t seed);

  std::vector<std::string> generate(const GenerationRequest& request) override;

 private:
  std::unordered_map<std::uint64_t, std::string> gold_;
  Options options_;
};

struct HttpOptions {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model = "default";
  std::string token_env = "GSKGC_API_KEY";
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  /// Send `top_k` in the request body; many chat APIs reject it.
  bool send_top_k = false;
};

/// OpenAI-compatible chat-completions client.
class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(HttpOptions options);
  std::vector<std::string> generate(const GenerationRequest& request) override;

  /// Request body for a prompt; exposed for inspection and tests.
  [[nodiscard]] std::string request_body(const GenerationRequest& request) const;
  /// Extracts `choices[].message.content`; throws EndpointError otherwise.
  static std::vector<std::string> parse_reply(std::string_view body);

 private:
  HttpOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// First line of a generation with surrounding quotes and punctuation
/// removed.
std::string extract_answer(std::string_view generation);

enum class Ranking { FirstOccurrence, Frequency };

struct Prediction {
  std::uint64_t id = 0;
  std::vector<std::string> answers;  // normalized, distinct, ranked
  std::vector<std::string> raw_generations;
  std::chrono::milliseconds latency{0};
  int generations = 0;
  bool short_list = false;
  std::optional<std::string> error;
};

/// k = 1 issues a single greedy generation. k > 1 samples in batches of
/// cfg.num_return_sequences until k distinct answers or 3k generations.
Prediction predict_top_k(Generator& generator, std::uint64_t id, std::string_view prompt, int k,
                         const GenerationConfig& sampled_config, Ranking ranking = Ranking::FirstOccurrence);

struct PromptInput {
  std::uint64_t id = 0;
  std::string prompt;
};

struct BatchOptions {
  int k = 1;
  GenerationConfig config = GenerationConfig::sampled();
  unsigned concurrency = 1;
  /// Process at most this many missing records (0 = all).
  std::size_t limit = 0;
  Ranking ranking = Ranking::FirstOccurrence;
};

struct BatchSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;  // already present in the output
  std::size_t processed = 0;
  std::size_t errors = 0;
  std::size_t short_lists = 0;
};

/// Runs every record whose id is not yet in `out`, appending as results
/// arrive, then rewrites the file sorted by id. Per-record failures are
/// stored as error markers.
BatchSummary run_batch(std::span<const PromptInput> records, Generator& generator, const BatchOptions& options,
                       const std::filesystem::path& out);

/// Prediction JSONL: `{"id","answers":[...],"error"?}` after a `_meta` line.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
std::string prediction_line(const Prediction& p);

}  // namespace gskgc
