#include "gskgc/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "gskgc/error.hpp"
#include "gskgc/io.hpp"

namespace gskgc {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

double ratio(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

template <typename Row>
std::vector<Row> read_jsonl(const std::filesystem::path& path, Row (*convert)(const nlohmann::json&)) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains(kMetaKey)) continue;
      rows.push_back(convert(j));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

GoldMap gold_from_rows(const std::vector<PipelineRow>& rows) {
  GoldMap gold;
  for (const auto& r : rows) {
    if (!gold.emplace(r.id, GoldEntry{r.answer, r.direction, r.prompt}).second) {
      throw ValidationError("duplicate gold id " + std::to_string(r.id));
    }
  }
  return gold;
}

// Scoring ------------------------------------------------------------------

double ScoreReport::rate_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return rate(i);
  }
  throw ValidationError("k=" + std::to_string(k) + " was not scored");
}

std::string ScoreReport::to_text() const {
  std::ostringstream out;
  out << "scored " << scored << " predictions (" << errors << " errors)\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out << "Hits@" << ks[i] << ": " << fmt_rate(rate(i)) << " (" << hits[i] << "/" << scored << ")";
    for (const auto d : {Direction::Forward, Direction::Backward}) {
      const auto& s = by_direction[static_cast<int>(d)];
      out << "  " << to_string(d) << " " << fmt_rate(ratio(s.hits[i], s.scored));
    }
    out << "\n";
  }
  return out.str();
}

std::string ScoreReport::to_json() const {
  ordered_json j;
  j["scored"] = scored;
  j["errors"] = errors;
  ordered_json metrics = ordered_json::object();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    ordered_json m;
    m["hits"] = hits[i];
    m["rate"] = rate(i);
    for (const auto d : {Direction::Forward, Direction::Backward}) {
      const auto& s = by_direction[static_cast<int>(d)];
      m[std::string(to_string(d))] = ordered_json{{"scored", s.scored}, {"hits", s.hits[i]}, {"rate", ratio(s.hits[i], s.scored)}};
    }
    metrics["hits@" + std::to_string(ks[i])] = m;
  }
  j["metrics"] = metrics;
  return j.dump(2);
}

ScoreReport hits_at_k(std::span<const Prediction> predictions, const GoldMap& gold, std::span<const int> ks) {
  ScoreReport report;
  report.ks.assign(ks.begin(), ks.end());
  std::sort(report.ks.begin(), report.ks.end());
  report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());
  if (report.ks.empty() || report.ks.front() < 1) throw ValidationError("ks must be positive");
  report.hits.assign(report.ks.size(), 0);
  for (auto& d : report.by_direction) d.hits.assign(report.ks.size(), 0);

  for (const auto& p : predictions) {
    auto it = gold.find(p.id);
    if (it == gold.end()) throw ValidationError("prediction id " + std::to_string(p.id) + " has no gold entry");
    auto& dir = report.by_direction[static_cast<int>(it->second.direction)];
    ++report.scored;
    ++dir.scored;
    if (p.error) {
      ++report.errors;
      continue;
    }
    const auto target = normalize_answer(it->second.answer);
    // Earliest rank wins if the answer list repeats after normalization.
    std::size_t rank = 0;
    for (; rank < p.answers.size(); ++rank) {
      if (normalize_answer(p.answers[rank]) == target) break;
    }
    if (rank == p.answers.size()) continue;
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      if (rank < static_cast<std::size_t>(report.ks[i])) {
        ++report.hits[i];
        ++dir.hits[i];
      }
    }
  }
  return report;
}

// Hallucination ------------------------------------------------------------

EntityLexicon EntityLexicon::from_graph(const KnowledgeGraph& kg) {
  EntityLexicon lex;
  const auto& vocab = kg.entities();
  for (std::uint32_t i = 0; i < vocab.size(); ++i) {
    lex.add(vocab.key(i));
    lex.add(vocab.surface(i));
  }
  return lex;
}

void EntityLexicon::add(std::string_view name) { names_.insert(normalize_answer(name)); }

bool EntityLexicon::contains(std::string_view answer) const { return names_.contains(normalize_answer(answer)); }

double HallucinationReport::rate(Direction d) const {
  return ratio(absent[static_cast<int>(d)], inspected[static_cast<int>(d)]);
}

double HallucinationReport::rate_all_ranks(Direction d) const {
  return ratio(absent_all_ranks[static_cast<int>(d)], inspected_all_ranks[static_cast<int>(d)]);
}

std::string HallucinationReport::to_text() const {
  std::ostringstream out;
  for (const auto d : {Direction::Forward, Direction::Backward}) {
    const int i = static_cast<int>(d);
    out << to_string(d) << ": " << absent[i] << "/" << inspected[i] << " rank-1 answers outside the vocabulary ("
        << fmt_rate(rate(d)) << "); all ranks " << absent_all_ranks[i] << "/" << inspected_all_ranks[i] << " ("
        << fmt_rate(rate_all_ranks(d)) << ")\n";
  }
  return out.str();
}

std::string HallucinationReport::to_json() const {
  ordered_json j;
  for (const auto d : {Direction::Forward, Direction::Backward}) {
    const int i = static_cast<int>(d);
    j[std::string(to_string(d))] = ordered_json{{"inspected", inspected[i]},
                                                {"absent", absent[i]},
                                                {"rate", rate(d)},
                                                {"inspected_all_ranks", inspected_all_ranks[i]},
                                                {"absent_all_ranks", absent_all_ranks[i]},
                                                {"rate_all_ranks", rate_all_ranks(d)}};
  }
  return j.dump(2);
}

HallucinationReport hallucination_stats(std::span<const Prediction> predictions, const GoldMap& gold,
                                        const EntityLexicon& lexicon) {
  HallucinationReport report;
  for (const auto& p : predictions) {
    auto it = gold.find(p.id);
    const int d = it == gold.end() ? 0 : static_cast<int>(it->second.direction);
    for (std::size_t rank = 0; rank < p.answers.size(); ++rank) {
      const bool absent = !lexicon.contains(p.answers[rank]);
      ++report.inspected_all_ranks[d];
      if (absent) ++report.absent_all_ranks[d];
      if (rank == 0) {
        ++report.inspected[d];
        if (absent) ++report.absent[d];
      }
    }
  }
  return report;
}

// Failures and judgments ---------------------------------------------------

std::vector<FailureRow> export_failures(std::span<const Prediction> predictions, const GoldMap& gold,
                                        const EntityLexicon& lexicon) {
  std::vector<FailureRow> rows;
  for (const auto& p : predictions) {
    auto it = gold.find(p.id);
    if (it == gold.end()) throw ValidationError("prediction id " + std::to_string(p.id) + " has no gold entry");
    const std::string predicted = p.answers.empty() ? std::string() : p.answers.front();
    if (!p.error && !predicted.empty() && normalize_answer(predicted) == normalize_answer(it->second.answer)) continue;
    rows.push_back(FailureRow{p.id, it->second.prompt, predicted, it->second.answer,
                              !predicted.empty() && lexicon.contains(predicted)});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return rows;
}

void write_failures_jsonl(std::ostream& out, const std::vector<FailureRow>& rows) {
  for (const auto& r : rows) {
    ordered_json j;
    j["id"] = r.id;
    j["prompt"] = r.prompt;
    j["predicted"] = r.predicted;
    j["gold"] = r.gold;
    j["predicted_in_kg"] = r.predicted_in_kg;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::vector<FailureRow> read_failures_jsonl(const std::filesystem::path& path) {
  return read_jsonl<FailureRow>(path, [](const nlohmann::json& j) {
    return FailureRow{j.at("id").get<std::uint64_t>(), j.value("prompt", std::string()),
                      j.at("predicted").get<std::string>(), j.at("gold").get<std::string>(),
                      j.at("predicted_in_kg").get<bool>()};
  });
}

std::vector<Judgment> read_judgments_jsonl(const std::filesystem::path& path) {
  return read_jsonl<Judgment>(path, [](const nlohmann::json& j) {
    return Judgment{j.at("id").get<std::uint64_t>(), j.at("verdict_a").get<bool>(), j.at("verdict_b").get<bool>()};
  });
}

std::string ReevaluationLedger::to_text() const {
  std::ostringstream out;
  out << "N=" << total << " correct=" << correct.size() << " failures=" << failures.size()
      << " judged=" << judgments.size() << "\n";
  out << "X (plausible, in KG)=" << in_kg.size() << "  Y (plausible, outside KG)=" << out_of_kg.size() << "\n";
  out << "raw=" << fmt_rate(raw) << " adjusted=" << fmt_rate(adjusted) << "\n";
  return out.str();
}

std::string ReevaluationLedger::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["correct"] = correct.size();
  j["failures"] = failures.size();
  j["judged"] = judgments.size();
  j["x_in_kg"] = std::vector<std::uint64_t>(in_kg.begin(), in_kg.end());
  j["y_out_of_kg"] = std::vector<std::uint64_t>(out_of_kg.begin(), out_of_kg.end());
  j["raw"] = raw;
  j["adjusted"] = adjusted;
  return j.dump(2);
}

ReevaluationLedger import_judgments_and_adjust(std::size_t total, const std::set<std::uint64_t>& correct,
                                               const std::vector<FailureRow>& failures,
                                               const std::vector<Judgment>& judgments) {
  ReevaluationLedger ledger;
  ledger.total = total;
  ledger.correct = correct;
  std::map<std::uint64_t, bool> in_kg_flag;
  for (const auto& f : failures) {
    if (correct.contains(f.id)) throw ValidationError("id " + std::to_string(f.id) + " is both correct and a failure");
    ledger.failures.insert(f.id);
    in_kg_flag[f.id] = f.predicted_in_kg;
  }
  if (ledger.correct.size() + ledger.failures.size() != total) {
    throw ValidationError("correct + failures (" + std::to_string(ledger.correct.size() + ledger.failures.size()) +
                          ") does not match N=" + std::to_string(total));
  }
  for (const auto& j : judgments) {
    if (!ledger.failures.contains(j.id)) {
      throw ValidationError("judgment for id " + std::to_string(j.id) + " which is not an exported failure");
    }
    if (!ledger.judgments.emplace(j.id, j).second) {
      throw ValidationError("duplicate judgment for id " + std::to_string(j.id));
    }
    if (j.verdict_a && j.verdict_b) (in_kg_flag[j.id] ? ledger.in_kg : ledger.out_of_kg).insert(j.id);
  }
  ledger.raw = ratio(ledger.correct.size(), total);
  ledger.adjusted = ratio(ledger.correct.size() + ledger.in_kg.size(), total);
  return ledger;
}

ReevaluationLedger reevaluate(std::span<const Prediction> predictions, const GoldMap& gold,
                              const std::vector<FailureRow>& failures, const std::vector<Judgment>& judgments) {
  std::set<std::uint64_t> correct;
  for (const auto& p : predictions) {
    auto it = gold.find(p.id);
    if (it == gold.end()) throw ValidationError("prediction id " + std::to_string(p.id) + " has no gold entry");
    if (!p.error && !p.answers.empty() &&
        normalize_answer(p.answers.front()) == normalize_answer(it->second.answer)) {
      correct.insert(p.id);
    }
  }
  return import_judgments_and_adjust(predictions.size(), correct, failures, judgments);
}

}  // namespace gskgc
