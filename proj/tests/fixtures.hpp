#pragma once

#include <sstream>
#include <string>

#include "gskgc/kg.hpp"

namespace gskgc::testing {

// train: (A,r1,B) (A,r1,C) (A,r2,D) (D,r3,E) (B,r3,E); test: (A,r1,E)
inline constexpr const char* kToyTrain = "A\tr1\tB\nA\tr1\tC\nA\tr2\tD\nD\tr3\tE\nB\tr3\tE\n";
inline constexpr const char* kToyTest = "A\tr1\tE\n";

inline KnowledgeGraph toy_graph() {
  GraphBuilder b;
  std::istringstream train(kToyTrain), test(kToyTest);
  b.parse_split(train, Split::Train, "toy-train");
  b.parse_split(test, Split::Test, "toy-test");
  return std::move(b).build();
}

inline Query find_query(const KnowledgeGraph& kg, Split split, std::string_view head, std::string_view rel,
                        std::string_view tail, Direction dir) {
  for (const auto& q : build_queries(kg, split)) {
    const auto t = query_triple(q);
    if (q.direction == dir && t.head == kg.entity(head) && t.relation == kg.relation(rel) &&
        t.tail == kg.entity(tail)) {
      return q;
    }
  }
  throw std::runtime_error("fixture query not found");
}

}  // namespace gskgc::testing
