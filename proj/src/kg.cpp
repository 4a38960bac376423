#include "gskgc/kg.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <sstream>

#include "gskgc/error.hpp"

namespace gskgc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

std::string_view to_string(Direction dir) {
  return dir == Direction::Forward ? "forward" : "backward";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "valid" || text == "dev") return Split::Valid;
  if (text == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

Direction parse_direction(std::string_view text) {
  if (text == "forward") return Direction::Forward;
  if (text == "backward") return Direction::Backward;
  throw ValidationError("unknown direction '" + std::string(text) + "'");
}

// Vocabulary ---------------------------------------------------------------

std::uint32_t Vocabulary::intern(std::string_view key) {
  auto it = index_.find(std::string(key));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(keys_.size());
  keys_.emplace_back(key);
  aliases_.emplace_back();
  index_.emplace(keys_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::surface(std::uint32_t id) const {
  const auto& alias = aliases_.at(id);
  return alias.empty() ? keys_[id] : alias;
}

void Vocabulary::set_alias(std::uint32_t id, std::string alias) { aliases_.at(id) = std::move(alias); }

// Builder ------------------------------------------------------------------

std::size_t GraphBuilder::TripleHash::operator()(const Triple& t) const noexcept {
  std::uint64_t h = t.head.value();
  h = h * 0x100000001b3ULL ^ t.relation.value();
  h = h * 0x100000001b3ULL ^ t.tail.value();
  h = h * 0x100000001b3ULL ^ (t.time ? t.time->value() + 1 : 0);
  return static_cast<std::size_t>(h);
}

std::string normalize_timestamp(std::string_view raw) {
  raw = trim(raw);
  // YYYY-MM-DD, YYYY/MM/DD, YYYY.MM.DD, optionally followed by a time part.
  if (raw.size() >= 10 && all_digits(raw.substr(0, 4)) && all_digits(raw.substr(5, 2)) &&
      all_digits(raw.substr(8, 2))) {
    const char s1 = raw[4], s2 = raw[7];
    if (s1 == s2 && (s1 == '-' || s1 == '/' || s1 == '.')) {
      std::string out(raw.substr(0, 10));
      out[4] = out[7] = '-';
      return out;
    }
  }
  return std::string(raw);
}

bool GraphBuilder::insert(Split split, const Triple& triple) {
  const int s = static_cast<int>(split);
  if (!seen_[s].emplace(triple, 0).second) return false;
  splits_[s].push_back(triple);
  return true;
}

bool GraphBuilder::add(Split split, std::string_view head, std::string_view relation,
                       std::string_view tail, std::optional<std::string_view> timestamp) {
  if (format_ == TripleFormat::Temporal && !timestamp) {
    throw ValidationError("temporal graph requires a timestamp for every triple");
  }
  if (format_ == TripleFormat::Static && timestamp) {
    throw ValidationError("static graph does not accept timestamps");
  }
  Triple t{EntityId(entities_.intern(head)), RelationId(relations_.intern(relation)),
           EntityId(entities_.intern(tail)), std::nullopt};
  if (timestamp) t.time = TimeId(times_.intern(normalize_timestamp(*timestamp)));
  return insert(split, t);
}

std::vector<Triple> GraphBuilder::parse_split(std::istream& in, Split split, std::string_view source,
                                              LoadReport* report) {
  const std::size_t expected_cols = format_ == TripleFormat::Temporal ? 4 : 3;
  std::vector<Triple> parsed;
  LoadReport local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty()) continue;
    auto cols = split_tabs(view);
    if (cols.size() != expected_cols) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": expected " << expected_cols << " tab-separated columns, got "
          << cols.size();
      throw ValidationError(msg.str());
    }
    for (auto& c : cols) c = trim(c);
    if (cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": empty head, relation or tail";
      throw ValidationError(msg.str());
    }
    ++local.rows;
    std::optional<std::string_view> ts;
    if (expected_cols == 4) ts = cols[3];
    if (!add(split, cols[0], cols[1], cols[2], ts)) {
      ++local.duplicates;
      std::ostringstream msg;
      msg << source << ":" << line_no << ": duplicate triple dropped";
      local.warnings.push_back(msg.str());
      continue;
    }
    parsed.push_back(splits_[static_cast<int>(split)].back());
  }
  if (report) *report = std::move(local);
  return parsed;
}

std::vector<Triple> GraphBuilder::load_split(const std::filesystem::path& path, Split split,
                                             LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file " + path.string());
  return parse_split(in, split, path.string(), report);
}

std::size_t GraphBuilder::load_entity_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open entity name file " + path.string());
  std::string line;
  std::size_t attached = 0;
  while (std::getline(in, line)) {
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) continue;
    const auto id = entities_.find(trim(view.substr(0, tab)));
    const auto name = trim(view.substr(tab + 1));
    if (id && !name.empty()) {
      entities_.set_alias(*id, std::string(name));
      ++attached;
    }
  }
  return attached;
}

KnowledgeGraph GraphBuilder::build() && {
  KnowledgeGraph kg;
  kg.format_ = format_;
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  kg.times_ = std::move(times_);
  for (int s = 0; s < 3; ++s) {
    kg.splits_[s] = std::move(splits_[s]);
    seen_[s].clear();
  }
  kg.build_indexes();
  return kg;
}

// Graph --------------------------------------------------------------------

void KnowledgeGraph::build_indexes() {
  const std::size_t n = entities_.size();
  const auto& train = splits_[0];

  auto build_csr = [&](bool out, std::vector<std::uint32_t>& offsets, std::vector<Edge>& edges) {
    offsets.assign(n + 1, 0);
    for (const auto& t : train) ++offsets[(out ? t.head : t.tail).value() + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    edges.resize(train.size());
    std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::uint32_t i = 0; i < train.size(); ++i) {
      const auto& t = train[i];
      const auto from = out ? t.head : t.tail;
      const auto other = out ? t.tail : t.head;
      edges[cursor[from.value()]++] = Edge{t.relation, other, i};
    }
    for (std::size_t e = 0; e < n; ++e) {
      std::sort(edges.begin() + offsets[e], edges.begin() + offsets[e + 1],
                [](const Edge& a, const Edge& b) {
                  return a.relation != b.relation ? a.relation < b.relation : a.triple < b.triple;
                });
    }
  };
  build_csr(true, out_offsets_, out_edges_);
  build_csr(false, in_offsets_, in_edges_);

  inc_offsets_.assign(n + 1, 0);
  for (const auto& t : train) {
    ++inc_offsets_[t.head.value() + 1];
    if (t.tail != t.head) ++inc_offsets_[t.tail.value() + 1];
  }
  for (std::size_t i = 0; i < n; ++i) inc_offsets_[i + 1] += inc_offsets_[i];
  incidence_.resize(inc_offsets_[n]);
  std::vector<std::uint32_t> cursor(inc_offsets_.begin(), inc_offsets_.end() - 1);
  // Triples are visited in index order, so each list comes out sorted by
  // triple; the forward entry of a triple precedes nothing else of it.
  for (std::uint32_t i = 0; i < train.size(); ++i) {
    const auto& t = train[i];
    incidence_[cursor[t.head.value()]++] = Incidence{i, true, t.tail};
    if (t.tail != t.head) incidence_[cursor[t.tail.value()]++] = Incidence{i, false, t.head};
  }
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const {
  check_entity(e);
  return std::span<const Edge>(out_edges_).subspan(out_offsets_[e.value()],
                                                   out_offsets_[e.value() + 1] - out_offsets_[e.value()]);
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId e) const {
  check_entity(e);
  return std::span<const Edge>(in_edges_).subspan(in_offsets_[e.value()],
                                                  in_offsets_[e.value() + 1] - in_offsets_[e.value()]);
}

namespace {

std::span<const Edge> relation_range(std::span<const Edge> edges, RelationId r) {
  auto lo = std::lower_bound(edges.begin(), edges.end(), r,
                             [](const Edge& e, RelationId rel) { return e.relation < rel; });
  auto hi = std::upper_bound(lo, edges.end(), r,
                             [](RelationId rel, const Edge& e) { return rel < e.relation; });
  return {lo, hi};
}

}  // namespace

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e, RelationId r) const {
  return relation_range(out_edges(e), r);
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId e, RelationId r) const {
  return relation_range(in_edges(e), r);
}

std::span<const Incidence> KnowledgeGraph::incidence(EntityId e) const {
  check_entity(e);
  return std::span<const Incidence>(incidence_).subspan(
      inc_offsets_[e.value()], inc_offsets_[e.value() + 1] - inc_offsets_[e.value()]);
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e.value() >= entities_.size()) {
    throw ValidationError("unknown entity id " + std::to_string(e.value()));
  }
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view key) const {
  if (auto id = entities_.find(key)) return EntityId(*id);
  return std::nullopt;
}

EntityId KnowledgeGraph::entity(std::string_view key) const {
  if (auto id = entities_.find(key)) return EntityId(*id);
  throw ValidationError("unknown entity '" + std::string(key) + "'");
}

RelationId KnowledgeGraph::relation(std::string_view key) const {
  if (auto id = relations_.find(key)) return RelationId(*id);
  throw ValidationError("unknown relation '" + std::string(key) + "'");
}

// Queries ------------------------------------------------------------------

std::uint64_t query_stream_key(Split split, std::uint64_t id) {
  return (static_cast<std::uint64_t>(split) << 56) | id;
}

std::vector<Query> build_queries(const KnowledgeGraph& kg, Split split) {
  const auto triples = kg.triples(split);
  std::vector<Query> queries;
  queries.reserve(2 * triples.size());
  for (std::uint32_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    queries.push_back(Query{2ULL * i, split, t.head, t.relation, Direction::Forward, t.time, t.tail, i});
    queries.push_back(Query{2ULL * i + 1, split, t.tail, t.relation, Direction::Backward, t.time, t.head, i});
  }
  return queries;
}

Triple query_triple(const Query& q) {
  if (q.direction == Direction::Forward) return Triple{q.anchor, q.relation, q.gold, q.time};
  return Triple{q.gold, q.relation, q.anchor, q.time};
}

std::optional<int> shortest_path_distance(const KnowledgeGraph& kg, EntityId from, EntityId to,
                                          int cap) {
  kg.check_entity(from);
  kg.check_entity(to);
  if (cap < 0) throw ValidationError("distance cap must be non-negative");
  if (from == to) return 0;
  std::vector<int> dist(kg.entity_count(), -1);
  std::deque<EntityId> frontier{from};
  dist[from.value()] = 0;
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    const int d = dist[cur.value()];
    if (d >= cap) continue;
    for (const auto& inc : kg.incidence(cur)) {
      auto& slot = dist[inc.other.value()];
      if (slot >= 0) continue;
      slot = d + 1;
      if (inc.other == to) return slot;
      frontier.push_back(inc.other);
    }
  }
  return std::nullopt;
}

// Stats --------------------------------------------------------------------

DatasetStats stats(const KnowledgeGraph& kg) {
  return DatasetStats{kg.entity_count(), kg.relation_count(), kg.triples(Split::Train).size(),
                      kg.triples(Split::Valid).size(), kg.triples(Split::Test).size()};
}

std::optional<DatasetStats> published_stats(std::string_view dataset) {
  if (dataset == "WN18RR") return DatasetStats{40943, 11, 86835, 3034, 3134};
  if (dataset == "FB15k-237") return DatasetStats{14541, 237, 272115, 17535, 20466};
  if (dataset == "FB15k-237N") return DatasetStats{13104, 93, 87282, 1827, 1828};
  if (dataset == "ICEWS14") return DatasetStats{6869, 230, 74845, 8514, 7371};
  if (dataset == "ICEWS05-15") return DatasetStats{10094, 251, 368868, 46302, 46159};
  return std::nullopt;
}

bool is_temporal_dataset(std::string_view dataset) { return dataset.starts_with("ICEWS"); }

std::string format_stats_table(std::string_view dataset, const DatasetStats& observed,
                               const std::optional<DatasetStats>& expected) {
  std::ostringstream out;
  auto row = [&](std::string_view label, const DatasetStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22.*s %9zu %10zu %9zu %9zu %9zu\n", static_cast<int>(label.size()),
                  label.data(), s.entities, s.relations, s.train, s.valid, s.test);
    out << buf;
  };
  char header[160];
  std::snprintf(header, sizeof header, "%-22s %9s %10s %9s %9s %9s\n", "Dataset", "#entity", "#relation",
                "#train", "#valid", "#test");
  out << header;
  row(dataset, observed);
  if (expected) {
    row("(published)", *expected);
    out << (observed == *expected ? "matches published statistics\n"
                                  : "MISMATCH against published statistics\n");
  }
  return out.str();
}

KnowledgeGraph load_dataset(const std::filesystem::path& dir, TripleFormat format,
                            std::vector<LoadReport>* reports,
                            const std::optional<std::filesystem::path>& entity_names) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  GraphBuilder builder(format);
  auto pick = [&](std::initializer_list<const char*> names) {
    for (const char* name : names) {
      auto p = dir / name;
      if (std::filesystem::exists(p)) return p;
    }
    throw IoError("missing split file in " + dir.string() + " (looked for " + *names.begin() + ")");
  };
  const std::pair<Split, std::filesystem::path> files[] = {
      {Split::Train, pick({"train.txt", "train.tsv"})},
      {Split::Valid, pick({"valid.txt", "dev.txt", "valid.tsv", "dev.tsv"})},
      {Split::Test, pick({"test.txt", "test.tsv"})},
  };
  for (const auto& [split, path] : files) {
    LoadReport report;
    builder.load_split(path, split, &report);
    if (reports) reports->push_back(std::move(report));
  }
  if (entity_names) builder.load_entity_names(*entity_names);
  return std::move(builder).build();
}

}  // namespace gskgc
