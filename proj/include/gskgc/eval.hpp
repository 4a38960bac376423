#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gskgc/inference.hpp"
#include "gskgc/kg.hpp"
#include "gskgc/prompt.hpp"

namespace gskgc {

/// Trim, collapse internal whitespace, ASCII case-fold, strip trailing periods.
std::string normalize_answer(std::string_view text);

struct GoldEntry {
  std::string answer;
  Direction direction = Direction::Forward;
  std::string prompt;
};
using GoldMap = std::map<std::uint64_t, GoldEntry>;

GoldMap gold_from_rows(const std::vector<PipelineRow>& rows);

struct DirectionScore {
  std::size_t scored = 0;
  std::vector<std::size_t> hits;  // aligned with ScoreReport::ks
};

struct ScoreReport {
  std::vector<int> ks;
  std::size_t scored = 0;
  std::size_t errors = 0;
  std::vector<std::size_t> hits;
  std::array<DirectionScore, 2> by_direction;

  [[nodiscard]] double rate(std::size_t i) const {
    return scored ? static_cast<double>(hits[i]) / static_cast<double>(scored) : 0.0;
  }
  [[nodiscard]] double rate_at(int k) const;

  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] std::string to_json() const;
};

/// A query hits at k iff its normalized gold is among the first k answers.
/// Error-marked predictions count as misses. A prediction without a gold
/// entry is a corrupt run and raises ValidationError.
ScoreReport hits_at_k(std::span<const Prediction> predictions, const GoldMap& gold, std::span<const int> ks);

/// Normalized surface forms (and raw keys) of every entity in a graph.
class EntityLexicon {
 public:
  static EntityLexicon from_graph(const KnowledgeGraph& kg);
  void add(std::string_view name);
  [[nodiscard]] bool contains(std::string_view answer) const;
  [[nodiscard]] std::size_t size() const { return names_.size(); }

 private:
  std::unordered_set<std::string> names_;
};

struct HallucinationReport {
  // Indexed by Direction.
  std::array<std::size_t, 2> inspected{};
  std::array<std::size_t, 2> absent{};
  std::array<std::size_t, 2> inspected_all_ranks{};
  std::array<std::size_t, 2> absent_all_ranks{};

  [[nodiscard]] double rate(Direction d) const;
  [[nodiscard]] double rate_all_ranks(Direction d) const;
  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] std::string to_json() const;
};

/// Counts rank-1 answers (and, separately, answers at any rank) whose
/// normalized form names no vocabulary entity.
HallucinationReport hallucination_stats(std::span<const Prediction> predictions, const GoldMap& gold,
                                        const EntityLexicon& lexicon);

struct FailureRow {
  std::uint64_t id = 0;
  std::string prompt;
  std::string predicted;
  std::string gold;
  bool predicted_in_kg = false;
};

/// One row per miss at rank 1.
std::vector<FailureRow> export_failures(std::span<const Prediction> predictions, const GoldMap& gold,
                                        const EntityLexicon& lexicon);
void write_failures_jsonl(std::ostream& out, const std::vector<FailureRow>& rows);
std::vector<FailureRow> read_failures_jsonl(const std::filesystem::path& path);

/// Two independent plausibility verdicts for one failed prediction.
struct Judgment {
  std::uint64_t id = 0;
  bool verdict_a = false;
  bool verdict_b = false;
};

std::vector<Judgment> read_judgments_jsonl(const std::filesystem::path& path);

struct ReevaluationLedger {
  std::size_t total = 0;
  std::set<std::uint64_t> correct;
  std::set<std::uint64_t> failures;
  std::map<std::uint64_t, Judgment> judgments;
  std::set<std::uint64_t> in_kg;       // X: unanimous, entity in vocabulary
  std::set<std::uint64_t> out_of_kg;   // Y: unanimous, entity outside vocabulary
  double raw = 0.0;
  double adjusted = 0.0;

  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] std::string to_json() const;
};

/// raw = |correct| / N, adjusted = (|correct| + |X|) / N. Both judges must
/// agree for a failure to enter X or Y. Rejects judgments for ids that are
/// not exported failures.
ReevaluationLedger import_judgments_and_adjust(std::size_t total, const std::set<std::uint64_t>& correct,
                                               const std::vector<FailureRow>& failures,
                                               const std::vector<Judgment>& judgments);

/// Convenience over a scored run: correct = hits at rank 1.
ReevaluationLedger reevaluate(std::span<const Prediction> predictions, const GoldMap& gold,
                              const std::vector<FailureRow>& failures, const std::vector<Judgment>& judgments);

}  // namespace gskgc
