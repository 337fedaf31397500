#pragma once

#include <cstdint>
#include <vector>

#include "dopt/local_search.hpp"
#include "dopt/relaxation.hpp"

namespace dopt {

struct BnbOptions {
  std::int64_t node_cap = 100'000;
  Scalar time_cap_seconds = 0;  // 0 = unlimited
  Scalar eps_gap = 1e-6;        // prune when bound <= incumbent + eps_gap
  Scalar int_tol = 1e-7;        // weight counts as integral within this
  RowGenOptions rowgen;         // per-node bound machinery (drops disabled)
  SearchOptions search;         // incumbent heuristics
};

struct BnbNodeStat {
  std::int64_t id = 0;
  std::int64_t parent = -1;
  int depth = 0;
  Scalar bound = 0;         // valid upper bound for the node subproblem
  Scalar parent_bound = 0;  // bound inherited at creation
  bool pruned = false;      // closed without branching
};

struct BnbProof {
  Scalar optimal_ldet = 0;
  std::int64_t nodes_explored = 0;
  Scalar final_gap = 0;
  bool proven = false;
};

struct BnbResult {
  Design design;
  BnbProof proof;
  std::vector<BnbNodeStat> trace;
};

// Best-bound-first branch and bound over the integer design problem. Node
// bounds come from the row-generation relaxation with the branching bounds
// folded into the restricted solve; incumbents come from rounding node
// weights and polishing with exchange local search. Returns the incumbent
// with a proof block; proof.proven is false when a cap stopped the search.
BnbResult solve_exact(const ModelSpec& spec, std::int64_t s,
                      const BnbOptions& opts = {});

}  // namespace dopt
