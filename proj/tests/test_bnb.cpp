#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "dopt/branch_bound.hpp"
#include "dopt/reference.hpp"
#include "test_util.hpp"

using namespace dopt;

TEST_CASE("exact solve matches brute force on enumerable instances") {
  struct Case {
    ModelKind kind;
    int factors;
    int levels;
    std::int64_t s;
  };
  const Case cases[] = {
      {ModelKind::linear, 2, 2, 3},  // boundary s = m
      {ModelKind::linear, 2, 2, 4},
      {ModelKind::linear, 2, 2, 5},
      {ModelKind::linear, 2, 2, 6},
      {ModelKind::linear, 3, 2, 4},
      {ModelKind::linear, 3, 2, 6},
      {ModelKind::quadratic, 2, 3, 6},
      {ModelKind::quadratic, 2, 3, 7},
      {ModelKind::quadratic, 2, 3, 8},
  };
  for (const auto& c : cases) {
    const ModelSpec spec = make_model_spec(c.kind, c.factors, c.levels);
    const BnbResult result = solve_exact(spec, c.s);
    const BruteForceResult brute = brute_force_optimum(spec, c.s);
    REQUIRE(brute.found);
    INFO("kind=", to_string(c.kind), " F=", c.factors, " s=", c.s);
    CHECK(result.proof.proven);
    CHECK(result.proof.final_gap <= 1e-6 + 1e-12);
    CHECK(std::abs(result.proof.optimal_ldet - brute.ldet) <=
          1e-9 * std::max<Scalar>(1, std::abs(brute.ldet)));
    REQUIRE(result.design.valid());
    CHECK(result.design.budget == c.s);
    CHECK(std::abs(dopt_test::fresh_ldet(spec, result.design) -
                   result.proof.optimal_ldet) < 1e-9);
  }
}

TEST_CASE("node trace is well-formed") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const BnbResult result = solve_exact(spec, 7);
  REQUIRE(!result.trace.empty());
  CHECK(result.trace.front().id == 0);
  CHECK(result.trace.front().parent == -1);
  CHECK(result.trace.front().depth == 0);
  CHECK(result.proof.nodes_explored ==
        static_cast<std::int64_t>(result.trace.size()));

  // The trace lists nodes in exploration order (best bound first), so ids
  // are unique but not sorted. A child can only be explored after the node
  // that created it.
  std::map<std::int64_t, std::size_t> position;
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    CHECK(position.count(result.trace[i].id) == 0);
    position[result.trace[i].id] = i;
  }
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const auto& stat = result.trace[i];
    if (stat.parent < 0) continue;
    // Bounds only tighten down the tree.
    CHECK(stat.bound <= stat.parent_bound + 1e-12);
    const auto parent = position.find(stat.parent);
    if (parent != position.end()) {
      const auto& pstat = result.trace[parent->second];
      CHECK(parent->second < i);
      CHECK(stat.parent_bound <= pstat.bound + 1e-12);
      CHECK(stat.depth == pstat.depth + 1);
    }
  }
}

TEST_CASE("node cap stops the search without a proof") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  BnbOptions opts;
  opts.node_cap = 1;
  const BnbResult result = solve_exact(spec, 12, opts);
  CHECK_FALSE(result.proof.proven);
  CHECK(result.proof.final_gap > 0);
  CHECK(result.proof.nodes_explored <= 1);
  REQUIRE(result.design.valid());
  CHECK(std::abs(dopt_test::fresh_ldet(spec, result.design) -
                 result.proof.optimal_ldet) < 1e-9);
}

TEST_CASE("time cap stops the search without a proof") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  BnbOptions opts;
  opts.time_cap_seconds = 1e-9;
  const BnbResult result = solve_exact(spec, 14, opts);
  CHECK_FALSE(result.proof.proven);
  REQUIRE(result.design.valid());
  CHECK(result.design.budget == 14);
}

TEST_CASE("incumbent sits inside the duality sandwich") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  const std::int64_t s = 11;
  const SearchResult search = local_search(spec, s, {});
  BnbOptions opts;
  opts.node_cap = 40;
  const BnbResult result = solve_exact(spec, s, opts);
  const BoundReport report = natural_bound_rowgen(spec, s);
  CHECK(result.proof.optimal_ldet >= search.ldet - 1e-9);
  CHECK(result.proof.optimal_ldet <= report.bound + 1e-6);
}

TEST_CASE("exact solve is deterministic") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const BnbResult a = solve_exact(spec, 8);
  const BnbResult b = solve_exact(spec, 8);
  CHECK(a.proof.optimal_ldet == b.proof.optimal_ldet);  // bitwise
  CHECK(a.proof.nodes_explored == b.proof.nodes_explored);
  CHECK(a.design.support == b.design.support);
}
