#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gskgc/kg.hpp"
#include "gskgc/subgraph.hpp"

namespace gskgc {

inline constexpr std::string_view kNegativeHeader = "Please give an answer outside the list: ";
inline constexpr std::string_view kNeighborHeaderPrefix = "The neighbors of ";
inline constexpr std::string_view kNeighborHeaderSuffix = " are as follows: ";

struct PromptConfig {
  bool use_negatives = true;
  bool use_neighbors = true;
  bool use_descriptions = false;
  int depth = 1;               // context path depth p, in [0, 5]
  std::size_t budget = 100;    // M
  std::uint64_t seed = 0;
  std::size_t max_chars = 8000;
  std::size_t path_cap = kDefaultPathCap;
  // `{entity}` is the anchor surface form, `{relation}` the relation.
  std::string forward_template = "Please complete this triple: ({entity}, {relation}, ?)";
  std::string backward_template = "Please complete this triple: (?, {relation}, {entity})";

  /// Throws ValidationError when depth or templates are out of range.
  void validate() const;

  /// Sorted `key=value` lines; the config hash is taken over this text.
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::string hash() const;

  /// Applies `key=value` lines ('#' and ';' start comments, [sections]
  /// are ignored). Unknown keys are rejected.
  void apply(std::string_view text);
  static PromptConfig from_file(const std::filesystem::path& path);
};

/// `entity \t description` rows, keyed by entity key.
class DescriptionTable {
 public:
  static DescriptionTable load(const std::filesystem::path& path);
  void set(std::string key, std::string description);
  [[nodiscard]] std::optional<std::string_view> find(std::string_view key) const;
  [[nodiscard]] std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, std::string> table_;
};

struct PromptParts {
  std::string basic;
  std::string negatives;
  std::string neighbors;
};

struct PromptRecord {
  std::uint64_t id = 0;
  Split split = Split::Train;
  Direction direction = Direction::Forward;
  EntityId anchor;
  std::string prompt;
  std::string answer;
  PromptParts parts;
  std::string config_hash;
  bool truncated = false;
  MergedContext context;
};

std::string render_basic(const KnowledgeGraph& kg, const Query& q, const PromptConfig& cfg,
                         std::optional<std::string_view> description = std::nullopt);
std::string render_negatives(const KnowledgeGraph& kg, const std::vector<EntityId>& negatives);
std::string render_path(const KnowledgeGraph& kg, const ContextPath& path);
std::string render_neighbors(const KnowledgeGraph& kg, EntityId anchor,
                             const std::vector<ContextPath>& paths);

/// basic, negatives and neighbors joined by single spaces, empty parts
/// omitted.
std::string compose_prompt(const PromptParts& parts);

PromptRecord build_record(const KnowledgeGraph& kg, const Query& q, const PromptConfig& cfg,
                          const DescriptionTable* descriptions, const std::string& config_hash);

/// One record per query, sorted by id. Work is spread over `concurrency`
/// threads; output does not depend on it.
std::vector<PromptRecord> build_dataset(const KnowledgeGraph& kg, Split split, const PromptConfig& cfg,
                                        const DescriptionTable* descriptions = nullptr,
                                        unsigned concurrency = 1);

struct DatasetHeader {
  std::string dataset;
  Split split = Split::Train;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t records = 0;
};

/// First line is a `_meta` header, then `{"id","split","direction","prompt","answer"}`.
void write_pipeline_jsonl(std::ostream& out, const DatasetHeader& header,
                          const std::vector<PromptRecord>& records);
/// `{"instruction","input","output"}` per line, no header.
void write_trainer_jsonl(std::ostream& out, const std::vector<PromptRecord>& records);
/// One `{id, negatives, paths, merged}` object per record.
void write_subgraph_dump(std::ostream& out, const KnowledgeGraph& kg, const std::vector<PromptRecord>& records,
                         const PromptConfig& cfg);

struct PipelineRow {
  std::uint64_t id = 0;
  Split split = Split::Train;
  Direction direction = Direction::Forward;
  std::string prompt;
  std::string answer;
};

std::vector<PipelineRow> read_pipeline_jsonl(const std::filesystem::path& path);

}  // namespace gskgc
