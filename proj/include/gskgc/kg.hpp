#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gskgc/ids.hpp"

namespace gskgc {

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };
enum class Direction : std::uint8_t { Forward = 0, Backward = 1 };

/// SKG rows are `head \t relation \t tail`; TKG rows add `\t timestamp`.
enum class TripleFormat { Static, Temporal };

std::string_view to_string(Split split);
std::string_view to_string(Direction dir);
Split parse_split(std::string_view text);
Direction parse_direction(std::string_view text);

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  std::optional<TimeId> time;

  friend bool operator==(const Triple&, const Triple&) = default;
};

/// String interning table. Ids are dense in [0, size()).
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view key);
  [[nodiscard]] std::optional<std::uint32_t> find(std::string_view key) const;
  [[nodiscard]] const std::string& key(std::uint32_t id) const { return keys_.at(id); }
  /// Display form; defaults to the key unless an alias was attached.
  [[nodiscard]] const std::string& surface(std::uint32_t id) const;
  void set_alias(std::uint32_t id, std::string alias);
  [[nodiscard]] std::size_t size() const { return keys_.size(); }

 private:
  std::vector<std::string> keys_;
  std::vector<std::string> aliases_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Edge in an out- or in-index. `other` is the tail for out-edges and the
/// head for in-edges; `triple` indexes the train split.
struct Edge {
  RelationId relation;
  EntityId other;
  std::uint32_t triple;
};

/// Undirected view of a train triple from one endpoint. `forward` is true
/// when the hop goes head -> tail.
struct Incidence {
  std::uint32_t triple;
  bool forward;
  EntityId other;
};

struct LoadReport {
  std::size_t rows = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> warnings;
};

class KnowledgeGraph;

/// Accumulates vocabularies and splits, then produces an immutable graph.
class GraphBuilder {
 public:
  explicit GraphBuilder(TripleFormat format = TripleFormat::Static) : format_(format) {}

  /// Parses a TSV split file. Malformed rows raise ValidationError naming
  /// the line; exact duplicates are dropped with a warning.
  std::vector<Triple> load_split(const std::filesystem::path& path, Split split,
                                 LoadReport* report = nullptr);
  std::vector<Triple> parse_split(std::istream& in, Split split, std::string_view source,
                                  LoadReport* report = nullptr);

  /// Adds one triple from strings; returns false if it was a duplicate.
  bool add(Split split, std::string_view head, std::string_view relation, std::string_view tail,
           std::optional<std::string_view> timestamp = std::nullopt);

  /// Attaches display names (`entity \t name` rows) for known entities.
  std::size_t load_entity_names(const std::filesystem::path& path);

  [[nodiscard]] TripleFormat format() const { return format_; }

  KnowledgeGraph build() &&;

 private:
  bool insert(Split split, const Triple& triple);

  struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept;
  };

  TripleFormat format_;
  Vocabulary entities_;
  Vocabulary relations_;
  Vocabulary times_;
  std::vector<Triple> splits_[3];
  std::unordered_map<Triple, char, TripleHash> seen_[3];
};

/// Normalizes a timestamp to YYYY-MM-DD where it looks like a date;
/// anything else (e.g. integer day offsets) passes through trimmed.
std::string normalize_timestamp(std::string_view raw);

/// Immutable graph: vocabularies over all splits, adjacency over train only.
/// Safe for concurrent reads.
class KnowledgeGraph {
 public:
  [[nodiscard]] TripleFormat format() const { return format_; }
  [[nodiscard]] bool temporal() const { return format_ == TripleFormat::Temporal; }

  [[nodiscard]] const Vocabulary& entities() const { return entities_; }
  [[nodiscard]] const Vocabulary& relations() const { return relations_; }
  [[nodiscard]] const Vocabulary& times() const { return times_; }

  [[nodiscard]] std::size_t entity_count() const { return entities_.size(); }
  [[nodiscard]] std::size_t relation_count() const { return relations_.size(); }

  [[nodiscard]] std::span<const Triple> triples(Split split) const {
    return splits_[static_cast<int>(split)];
  }
  [[nodiscard]] const Triple& train_triple(std::uint32_t index) const {
    return splits_[0][index];
  }

  /// Out-edges of e, sorted by (relation, triple).
  [[nodiscard]] std::span<const Edge> out_edges(EntityId e) const;
  /// In-edges of e, sorted by (relation, triple).
  [[nodiscard]] std::span<const Edge> in_edges(EntityId e) const;
  /// Out-edges of e carrying relation r.
  [[nodiscard]] std::span<const Edge> out_edges(EntityId e, RelationId r) const;
  /// In-edges of e carrying relation r.
  [[nodiscard]] std::span<const Edge> in_edges(EntityId e, RelationId r) const;
  /// Train triples touching e in either role, sorted by (triple, forward
  /// first). A self-loop appears once, as a forward hop.
  [[nodiscard]] std::span<const Incidence> incidence(EntityId e) const;

  [[nodiscard]] EntityId entity(std::string_view key) const;
  [[nodiscard]] RelationId relation(std::string_view key) const;
  [[nodiscard]] std::optional<EntityId> find_entity(std::string_view key) const;

  [[nodiscard]] const std::string& entity_name(EntityId e) const {
    return entities_.surface(e.value());
  }
  [[nodiscard]] const std::string& relation_name(RelationId r) const {
    return relations_.surface(r.value());
  }
  [[nodiscard]] const std::string& time_name(TimeId t) const { return times_.key(t.value()); }

  /// Throws ValidationError for ids outside the vocabulary.
  void check_entity(EntityId e) const;

 private:
  friend class GraphBuilder;
  KnowledgeGraph() = default;
  void build_indexes();

  TripleFormat format_ = TripleFormat::Static;
  Vocabulary entities_;
  Vocabulary relations_;
  Vocabulary times_;
  std::vector<Triple> splits_[3];

  std::vector<std::uint32_t> out_offsets_, in_offsets_, inc_offsets_;
  std::vector<Edge> out_edges_, in_edges_;
  std::vector<Incidence> incidence_;
};

/// One directed link-prediction task derived from a split triple.
struct Query {
  std::uint64_t id = 0;  // 2 * triple index + direction, unique within a split
  Split split = Split::Train;
  EntityId anchor;
  RelationId relation;
  Direction direction = Direction::Forward;
  std::optional<TimeId> time;
  EntityId gold;
  std::uint32_t triple = 0;

  /// Key unique across splits; used to derive per-query random streams.
  [[nodiscard]] std::uint64_t stream_key() const {
    return (static_cast<std::uint64_t>(split) << 56) | id;
  }
};

std::uint64_t query_stream_key(Split split, std::uint64_t id);

/// Two queries per triple: forward (h, r, ?) then backward (?, r, t).
std::vector<Query> build_queries(const KnowledgeGraph& kg, Split split);

/// Recovers the (h, r, t) a query was derived from.
Triple query_triple(const Query& q);

/// Breadth-first distance on the undirected train graph. nullopt when the
/// target is unreachable within `cap` hops.
std::optional<int> shortest_path_distance(const KnowledgeGraph& kg, EntityId from, EntityId to,
                                          int cap);

struct DatasetStats {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats stats(const KnowledgeGraph& kg);

/// Published statistics for the benchmark datasets, by name
/// (WN18RR, FB15k-237, FB15k-237N, ICEWS14, ICEWS05-15).
std::optional<DatasetStats> published_stats(std::string_view dataset);
bool is_temporal_dataset(std::string_view dataset);

std::string format_stats_table(std::string_view dataset, const DatasetStats& observed,
                               const std::optional<DatasetStats>& expected);

/// Loads train/valid/test from a dataset directory. Accepts `valid.txt` or
/// `dev.txt` for the validation split.
KnowledgeGraph load_dataset(const std::filesystem::path& dir, TripleFormat format,
                            std::vector<LoadReport>* reports = nullptr,
                            const std::optional<std::filesystem::path>& entity_names = std::nullopt);

}  // namespace gskgc
