#include "gskgc/subgraph.hpp"

#include <algorithm>
#include <deque>

#include "gskgc/error.hpp"
#include "gskgc/rng.hpp"

namespace gskgc {

EgoGraph ego_graph(const KnowledgeGraph& kg, EntityId center, int radius) {
  kg.check_entity(center);
  if (radius < 0) throw ValidationError("ego graph radius must be non-negative");

  // Every triple touching a node at distance <= radius qualifies.
  std::vector<int> dist(kg.entity_count(), -1);
  std::vector<EntityId> reached{center};
  std::deque<EntityId> frontier{center};
  dist[center.value()] = 0;
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (dist[cur.value()] >= radius) continue;
    for (const auto& inc : kg.incidence(cur)) {
      if (dist[inc.other.value()] >= 0) continue;
      dist[inc.other.value()] = dist[cur.value()] + 1;
      reached.push_back(inc.other);
      frontier.push_back(inc.other);
    }
  }

  EgoGraph ego{center, {}};
  for (const auto e : reached) {
    for (const auto& inc : kg.incidence(e)) ego.triples.push_back(inc.triple);
  }
  std::sort(ego.triples.begin(), ego.triples.end());
  ego.triples.erase(std::unique(ego.triples.begin(), ego.triples.end()), ego.triples.end());
  return ego;
}

std::vector<std::uint32_t> incident_triples(const KnowledgeGraph& kg, EntityId e) {
  std::vector<std::uint32_t> out;
  for (const auto& inc : kg.incidence(e)) out.push_back(inc.triple);
  return out;  // incidence is sorted by triple, self-loops listed once
}

NegativeSet negatives(const KnowledgeGraph& kg, const Query& q) {
  const auto answers = q.direction == Direction::Forward ? kg.out_edges(q.anchor, q.relation)
                                                         : kg.in_edges(q.anchor, q.relation);
  NegativeSet set{q.stream_key(), {}};
  set.entities.reserve(answers.size());
  for (const auto& edge : answers) {
    if (edge.other != q.gold) set.entities.push_back(edge.other);
  }
  // Temporal graphs repeat (e, r, x) across timestamps.
  std::sort(set.entities.begin(), set.entities.end());
  set.entities.erase(std::unique(set.entities.begin(), set.entities.end()), set.entities.end());
  return set;
}

namespace {

bool is_query_edge(const KnowledgeGraph& kg, const Query& q, std::uint32_t triple) {
  const auto& t = kg.train_triple(triple);
  if (t.relation != q.relation) return false;
  return q.direction == Direction::Forward ? t.head == q.anchor : t.tail == q.anchor;
}

}  // namespace

std::vector<std::uint32_t> neighbor_triples(const KnowledgeGraph& kg, const Query& q) {
  std::vector<std::uint32_t> out;
  for (const auto& inc : kg.incidence(q.anchor)) {
    if (!is_query_edge(kg, q, inc.triple)) out.push_back(inc.triple);
  }
  return out;
}

std::vector<ContextPath> context_paths(const KnowledgeGraph& kg, const Query& q, int depth,
                                       std::size_t cap) {
  if (depth < 0 || depth > kMaxPathDepth) {
    throw ValidationError("context path depth must be in [0, " + std::to_string(kMaxPathDepth) + "]");
  }
  kg.check_entity(q.anchor);
  std::vector<ContextPath> paths;
  if (depth == 0 || cap == 0) return paths;

  std::vector<Hop> stack;
  std::vector<EntityId> on_path{q.anchor};

  auto on_path_contains = [&](EntityId e) {
    return std::find(on_path.begin(), on_path.end(), e) != on_path.end();
  };

  // Explicit recursion depth is bounded by kMaxPathDepth.
  auto extend = [&](auto&& self, EntityId at) -> bool {
    for (const auto& inc : kg.incidence(at)) {
      if (stack.empty() && is_query_edge(kg, q, inc.triple)) continue;
      if (on_path_contains(inc.other)) continue;
      stack.push_back(Hop{inc.triple, inc.forward, inc.other});
      on_path.push_back(inc.other);
      paths.push_back(ContextPath{q.anchor, stack});
      bool more = paths.size() < cap;
      if (more && static_cast<int>(stack.size()) < depth) more = self(self, inc.other);
      stack.pop_back();
      on_path.pop_back();
      if (!more) return false;
    }
    return true;
  };
  extend(extend, q.anchor);
  return paths;
}

MergedContext merge_budget(const NegativeSet& negs, const std::vector<ContextPath>& paths,
                           std::size_t budget, std::uint64_t seed) {
  MergedContext merged;
  merged.budget = budget;
  merged.available_negatives = negs.entities.size();
  if (budget == 0) return merged;

  auto rng = SplitMix64::derive(seed, negs.query_key);
  if (negs.entities.size() >= budget) {
    for (const auto i : sample_indices(negs.entities.size(), budget, rng)) {
      merged.negatives.push_back(negs.entities[i]);
    }
    return merged;
  }
  merged.negatives = negs.entities;
  const std::size_t room = budget - negs.entities.size();
  for (const auto i : sample_indices(paths.size(), room, rng)) merged.neighbors.push_back(paths[i]);
  return merged;
}

}  // namespace gskgc
