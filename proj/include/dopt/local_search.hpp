#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dopt/info_matrix.hpp"
#include "dopt/model.hpp"
#include "dopt/pricing.hpp"

namespace dopt {

struct SearchOptions {
  std::int64_t max_iterations = -1;  // < 0: run until locally optimal
  Scalar eps_imp = 1e-8;             // relative improvement threshold
  int threads = 0;
  std::uint64_t seed = 0;
  int starts = 1;  // > 1 enables seeded multi-start from perturbed designs
  // Price all leaving rows in one enumeration pass for linear models instead
  // of one oracle call per row; same result, much cheaper.
  bool fused_linear_scan = true;
  PriceOptions price;
};

// One improving exchange x - e_leave + e_enter.
struct ExchangeMove {
  FactorPoint leave;
  FactorPoint enter;
  Scalar delta_ldet = 0;
};

struct SearchTrace {
  struct Step {
    Scalar ldet;  // objective after the move
    ExchangeMove move;
  };
  Scalar initial_ldet = 0;
  std::vector<Step> steps;
  std::int64_t skipped_singular = 0;  // removals rejected as singular
};

struct BestExchange {
  std::optional<ExchangeMove> move;
  std::int64_t skipped_singular = 0;
};

struct SearchResult {
  Design design;
  Scalar ldet = 0;
  SearchTrace trace;
};

// The canonical full-rank starter: for the linear model the origin plus the F
// unit points; for the quadratic model the origin, e_i, 2 e_i and e_i + e_j.
// Each point gets floor(s/m) units and the s mod m points smallest in encoded
// index get one extra.
Design initial_design(const ModelSpec& spec, std::int64_t s);

// Scans every support point j, prices the best entering row against
// (B - v_j v_j^T)^{-1}, and returns the move with the largest ldet gain, or
// nothing when no move beats eps_imp relative improvement.
BestExchange best_exchange(const ModelSpec& spec, const Design& design,
                           const InfoMatrix& info, const SearchOptions& opts = {});

// Exchange local search from the canonical starter (or a supplied design).
SearchResult local_search(const ModelSpec& spec, std::int64_t s,
                          const SearchOptions& opts = {});
SearchResult local_search_from(const ModelSpec& spec, const Design& start,
                               const SearchOptions& opts = {});

// ldet gain of removing a row (B -> M) and inserting one with entering gain
// q = v^T M^{-1} v: log(1 + q) - (ldet B - ldet M).
inline Scalar exchange_delta(Scalar ldet_before, Scalar ldet_removed, Scalar q) {
  return std::log1p(q) - (ldet_before - ldet_removed);
}

}  // namespace dopt
