#include "gskgc/prompt.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "gskgc/error.hpp"
#include "gskgc/io.hpp"

namespace gskgc {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key '" + std::string(key) + "' expects a boolean, got '" + std::string(v) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ValidationError("config key '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string dump_line(const ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

// Config -------------------------------------------------------------------

void PromptConfig::validate() const {
  if (depth < 0 || depth > kMaxPathDepth) {
    throw ValidationError("p must be in [0, " + std::to_string(kMaxPathDepth) + "], got " + std::to_string(depth));
  }
  for (const auto* tpl : {&forward_template, &backward_template}) {
    if (tpl->find("{entity}") == std::string::npos || tpl->find("{relation}") == std::string::npos) {
      throw ValidationError("prompt templates need {entity} and {relation} placeholders");
    }
  }
}

std::string PromptConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"backward_template", backward_template},
      {"forward_template", forward_template},
      {"M", std::to_string(budget)},
      {"max_chars", std::to_string(max_chars)},
      {"p", std::to_string(depth)},
      {"path_cap", std::to_string(path_cap)},
      {"seed", std::to_string(seed)},
      {"use_descriptions", use_descriptions ? "true" : "false"},
      {"use_negatives", use_negatives ? "true" : "false"},
      {"use_neighbors", use_neighbors ? "true" : "false"},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string PromptConfig::hash() const { return sha256_hex(canonical()).substr(0, 16); }

void PromptConfig::apply(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';' || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

    if (key == "use_negatives") use_negatives = parse_bool(key, value);
    else if (key == "use_neighbors") use_neighbors = parse_bool(key, value);
    else if (key == "use_descriptions") use_descriptions = parse_bool(key, value);
    else if (key == "p") depth = parse_number<int>(key, value);
    else if (key == "M") budget = parse_number<std::size_t>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "max_chars") max_chars = parse_number<std::size_t>(key, value);
    else if (key == "path_cap") path_cap = parse_number<std::size_t>(key, value);
    else if (key == "forward_template") forward_template = std::string(value);
    else if (key == "backward_template") backward_template = std::string(value);
    else throw ValidationError("unknown config key '" + std::string(key) + "'");
  }
  validate();
}

PromptConfig PromptConfig::from_file(const std::filesystem::path& path) {
  PromptConfig cfg;
  cfg.apply(read_file(path));
  return cfg;
}

// Descriptions -------------------------------------------------------------

DescriptionTable DescriptionTable::load(const std::filesystem::path& path) {
  DescriptionTable table;
  for (const auto& line : read_lines(path)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    auto key = trim(std::string_view(line).substr(0, tab));
    auto desc = trim(std::string_view(line).substr(tab + 1));
    if (!key.empty() && !desc.empty()) table.set(std::string(key), std::string(desc));
  }
  return table;
}

void DescriptionTable::set(std::string key, std::string description) {
  table_.insert_or_assign(std::move(key), std::move(description));
}

std::optional<std::string_view> DescriptionTable::find(std::string_view key) const {
  auto it = table_.find(std::string(key));
  if (it == table_.end()) return std::nullopt;
  return std::string_view(it->second);
}

// Rendering ----------------------------------------------------------------

std::string render_basic(const KnowledgeGraph& kg, const Query& q, const PromptConfig& cfg,
                         std::optional<std::string_view> description) {
  const auto& anchor = kg.entity_name(q.anchor);
  const auto& tpl = q.direction == Direction::Forward ? cfg.forward_template : cfg.backward_template;
  std::string out = replace_all(replace_all(tpl, "{entity}", anchor), "{relation}", kg.relation_name(q.relation));
  if (q.time) out += " at " + kg.time_name(*q.time);
  out += ".";
  if (description && !description->empty()) {
    out += " ";
    out += anchor;
    out += " means ";
    out += *description;
  }
  return out;
}

std::string render_negatives(const KnowledgeGraph& kg, const std::vector<EntityId>& negatives) {
  if (negatives.empty()) return {};
  std::string out(kNegativeHeader);
  out += "[";
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    if (i) out += ", ";
    out += kg.entity_name(negatives[i]);
  }
  out += "]";
  return out;
}

std::string render_path(const KnowledgeGraph& kg, const ContextPath& path) {
  std::string out = "(" + kg.entity_name(path.start);
  for (const auto& hop : path.hops) {
    const auto& t = kg.train_triple(hop.triple);
    out += ", ";
    if (!hop.forward) out += "inverse of ";
    out += kg.relation_name(t.relation);
    if (t.time) out += " [" + kg.time_name(*t.time) + "]";
    out += ", ";
    out += kg.entity_name(hop.to);
  }
  out += ")";
  return out;
}

std::string render_neighbors(const KnowledgeGraph& kg, EntityId anchor, const std::vector<ContextPath>& paths) {
  if (paths.empty()) return {};
  std::string out(kNeighborHeaderPrefix);
  out += kg.entity_name(anchor);
  out += kNeighborHeaderSuffix;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i) out += ", ";
    out += render_path(kg, paths[i]);
  }
  return out;
}

std::string compose_prompt(const PromptParts& parts) {
  std::string out = parts.basic;
  for (const auto* part : {&parts.negatives, &parts.neighbors}) {
    if (part->empty()) continue;
    if (!out.empty()) out += " ";
    out += *part;
  }
  return out;
}

PromptRecord build_record(const KnowledgeGraph& kg, const Query& q, const PromptConfig& cfg,
                          const DescriptionTable* descriptions, const std::string& config_hash) {
  PromptRecord rec;
  rec.id = q.id;
  rec.split = q.split;
  rec.direction = q.direction;
  rec.anchor = q.anchor;
  rec.answer = kg.entity_name(q.gold);
  rec.config_hash = config_hash;

  std::optional<std::string_view> desc;
  if (cfg.use_descriptions && descriptions) {
    desc = descriptions->find(kg.entities().key(q.anchor.value()));
    if (!desc) desc = descriptions->find(kg.entity_name(q.anchor));
  }
  rec.parts.basic = render_basic(kg, q, cfg, desc);

  NegativeSet negs{q.stream_key(), {}};
  if (cfg.use_negatives && cfg.budget > 0) negs = negatives(kg, q);
  std::vector<ContextPath> paths;
  // Paths are only consulted when negatives leave room in the budget.
  if (cfg.use_neighbors && cfg.depth > 0 && negs.entities.size() < cfg.budget) {
    paths = context_paths(kg, q, cfg.depth, cfg.path_cap);
  }
  rec.context = merge_budget(negs, paths, cfg.budget, cfg.seed);
  rec.parts.negatives = render_negatives(kg, rec.context.negatives);
  rec.parts.neighbors = render_neighbors(kg, q.anchor, rec.context.neighbors);
  rec.prompt = compose_prompt(rec.parts);

  // Over the cap: drop neighbor paths from the end; negatives stay.
  if (rec.prompt.size() > cfg.max_chars) {
    rec.truncated = true;
    auto& kept = rec.context.neighbors;
    const std::size_t fixed = compose_prompt({rec.parts.basic, rec.parts.negatives, {}}).size();
    if (fixed >= cfg.max_chars) {
      kept.clear();
    } else {
      // Header plus joining space, then ", "-separated paths.
      std::size_t len = fixed + 1 + kNeighborHeaderPrefix.size() + kg.entity_name(q.anchor).size() +
                        kNeighborHeaderSuffix.size();
      std::size_t keep = 0;
      for (; keep < kept.size(); ++keep) {
        const std::size_t add = render_path(kg, kept[keep]).size() + (keep ? 2 : 0);
        if (len + add > cfg.max_chars) break;
        len += add;
      }
      kept.resize(keep);
    }
    rec.parts.neighbors = render_neighbors(kg, q.anchor, kept);
    rec.prompt = compose_prompt(rec.parts);
  }
  return rec;
}

std::vector<PromptRecord> build_dataset(const KnowledgeGraph& kg, Split split, const PromptConfig& cfg,
                                        const DescriptionTable* descriptions, unsigned concurrency) {
  cfg.validate();
  const auto queries = build_queries(kg, split);
  const auto hash = cfg.hash();
  std::vector<PromptRecord> records(queries.size());

  concurrency = std::max(1u, std::min<unsigned>(concurrency, static_cast<unsigned>(queries.size() ? queries.size() : 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      records[i] = build_record(kg, queries[i], cfg, descriptions, hash);
    }
  };
  if (concurrency == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < concurrency; ++t) pool.emplace_back(work);
  }
  // Queries are generated in id order already; keep the sink ordered.
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return records;
}

// JSONL --------------------------------------------------------------------

void write_pipeline_jsonl(std::ostream& out, const DatasetHeader& header, const std::vector<PromptRecord>& records) {
  ordered_json meta;
  meta["kind"] = "pipeline";
  meta["dataset"] = header.dataset;
  meta["split"] = std::string(to_string(header.split));
  meta["config_hash"] = header.config_hash;
  meta["seed"] = header.seed;
  meta["records"] = header.records;
  ordered_json head;
  head[std::string(kMetaKey)] = meta;
  out << dump_line(head) << '\n';
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["split"] = std::string(to_string(r.split));
    j["direction"] = std::string(to_string(r.direction));
    j["prompt"] = r.prompt;
    j["answer"] = r.answer;
    out << dump_line(j) << '\n';
  }
}

void write_trainer_jsonl(std::ostream& out, const std::vector<PromptRecord>& records) {
  for (const auto& r : records) {
    ordered_json j;
    j["instruction"] = r.prompt;
    j["input"] = "";
    j["output"] = r.answer;
    out << dump_line(j) << '\n';
  }
}

void write_subgraph_dump(std::ostream& out, const KnowledgeGraph& kg, const std::vector<PromptRecord>& records,
                         const PromptConfig& cfg) {
  for (const auto& r : records) {
    const auto& t = kg.triples(r.split)[r.id / 2];
    const bool fwd = r.direction == Direction::Forward;
    Query q{r.id, r.split, fwd ? t.head : t.tail, t.relation, r.direction, t.time, fwd ? t.tail : t.head,
            static_cast<std::uint32_t>(r.id / 2)};
    ordered_json j;
    j["id"] = r.id;
    auto names = ordered_json::array();
    for (const auto e : negatives(kg, q).entities) names.push_back(kg.entity_name(e));
    j["negatives"] = names;
    auto paths = ordered_json::array();
    for (const auto& p : context_paths(kg, q, cfg.depth, cfg.path_cap)) paths.push_back(render_path(kg, p));
    j["paths"] = paths;
    ordered_json merged;
    auto mneg = ordered_json::array();
    for (const auto e : r.context.negatives) mneg.push_back(kg.entity_name(e));
    auto mpaths = ordered_json::array();
    for (const auto& p : r.context.neighbors) mpaths.push_back(render_path(kg, p));
    merged["negatives"] = mneg;
    merged["neighbors"] = mpaths;
    merged["budget"] = r.context.budget;
    j["merged"] = merged;
    out << dump_line(j) << '\n';
  }
}

std::vector<PipelineRow> read_pipeline_jsonl(const std::filesystem::path& path) {
  std::vector<PipelineRow> rows;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains(kMetaKey)) continue;
    try {
      PipelineRow row;
      row.id = j.at("id").get<std::uint64_t>();
      row.split = parse_split(j.value("split", std::string("test")));
      row.direction = parse_direction(j.value("direction", std::string("forward")));
      row.prompt = j.value("prompt", std::string());
      row.answer = j.at("answer").get<std::string>();
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace gskgc
