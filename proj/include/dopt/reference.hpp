#pragma once

#include <cstdint>

#include "dopt/model.hpp"
#include "dopt/pricing.hpp"
#include "dopt/relaxation.hpp"

namespace dopt {

// Brute-force answers used to validate the fast paths. Everything here scans
// explicit dense rows and factorizes from scratch on purpose, so no kernel
// code is shared with the solvers under test.

// Dense argmax of v^T Q v over all n rows; same tie rule as price().
PricingResult brute_force_price(const ModelSpec& spec, const Matrix& Q,
                                int top_k = 1);

struct BruteForceResult {
  Design design;
  Scalar ldet = 0;
  bool found = false;  // false when every size-s multiset is singular
};

// Enumerates every multiset of s rows (nondecreasing index sequences) and
// returns the nonsingular one with the largest ldet; first in lexicographic
// order wins ties. Guarded by C(n+s-1, s) <= 10^7.
BruteForceResult brute_force_optimum(const ModelSpec& spec, std::int64_t s);

// Frank-Wolfe over all n rows, no pooling, fresh factorization every
// iteration, run to a 1e-8 relative Kiefer-Wolfowitz gap. Weights are
// indexed by encoded row index. Guarded by n <= 10^4.
RelaxSolution dense_relaxation(const ModelSpec& spec, std::int64_t s);

struct ExchangeCheck {
  bool locally_optimal = true;
  Scalar best_delta = 0;
  FactorPoint leave;
  FactorPoint enter;
};

// Scans every (support row out, grid row in) exchange with fresh
// factorizations and reports the best improvement, if any beats the
// relative eps_imp threshold.
ExchangeCheck verify_local_optimum(const ModelSpec& spec, const Design& design,
                                   Scalar eps_imp = 1e-8);

}  // namespace dopt
