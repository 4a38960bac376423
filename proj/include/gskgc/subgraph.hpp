#pragma once

#include <cstdint>
#include <vector>

#include "gskgc/kg.hpp"

namespace gskgc {

/// Longest context path, in hops, and the default pruning radius.
inline constexpr int kMaxPathDepth = 5;
inline constexpr int kDefaultEgoRadius = 5;
/// Paths enumerated per query before sampling.
inline constexpr std::size_t kDefaultPathCap = 10'000;

/// Train triples with at least one endpoint within `radius` of `center`.
struct EgoGraph {
  EntityId center;
  std::vector<std::uint32_t> triples;  // train indices, ascending
};

/// Known train answers to (anchor, relation), gold excluded.
struct NegativeSet {
  std::uint64_t query_key = 0;
  std::vector<EntityId> entities;  // ascending id, no duplicates
};

struct Hop {
  std::uint32_t triple;  // train index
  bool forward;          // traversed head -> tail
  EntityId to;

  friend bool operator==(const Hop&, const Hop&) = default;
};

/// Simple path starting at the query anchor.
struct ContextPath {
  EntityId start;
  std::vector<Hop> hops;

  friend bool operator==(const ContextPath&, const ContextPath&) = default;
};

/// Budgeted union of negatives and context paths.
struct MergedContext {
  std::vector<EntityId> negatives;
  std::vector<ContextPath> neighbors;
  std::size_t budget = 0;
  /// Size of the negative pool before sampling.
  std::size_t available_negatives = 0;

  [[nodiscard]] std::size_t size() const { return negatives.size() + neighbors.size(); }
};

EgoGraph ego_graph(const KnowledgeGraph& kg, EntityId center, int radius = kDefaultEgoRadius);

/// Train triples with `e` as head or tail, ascending.
std::vector<std::uint32_t> incident_triples(const KnowledgeGraph& kg, EntityId e);

NegativeSet negatives(const KnowledgeGraph& kg, const Query& q);

/// Incident triples of the anchor minus those matching the query's
/// (anchor, relation) orientation, i.e. minus negatives and the gold edge.
std::vector<std::uint32_t> neighbor_triples(const KnowledgeGraph& kg, const Query& q);

/// All simple paths of 1..depth hops from the anchor whose first hop is a
/// neighbor triple, in depth-first preorder over each entity's incidence
/// list. Later hops may traverse edges in either direction. Enumeration
/// stops after `cap` paths.
std::vector<ContextPath> context_paths(const KnowledgeGraph& kg, const Query& q, int depth,
                                       std::size_t cap = kDefaultPathCap);

/// Negatives take priority: if they fill the budget, M of them are sampled
/// and no paths are kept; otherwise every negative is kept and the rest of
/// the budget is sampled from `paths`. Sampling is keyed by
/// (seed, negs.query_key), and sampled items keep their input order.
MergedContext merge_budget(const NegativeSet& negs, const std::vector<ContextPath>& paths,
                           std::size_t budget, std::uint64_t seed);

}  // namespace gskgc
