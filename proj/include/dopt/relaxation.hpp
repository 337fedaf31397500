#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dopt/info_matrix.hpp"
#include "dopt/model.hpp"
#include "dopt/pricing.hpp"

namespace dopt {

/// Working subset of the implicit design rows, with cached expansions.
/// Points keep their insertion order; duplicates are rejected.
class RowPool {
 public:
  RowPool(const ModelSpec& spec, const std::vector<FactorPoint>& points);

  const ModelSpec& model() const { return spec_; }
  Index size() const { return static_cast<Index>(points_.size()); }
  const std::vector<FactorPoint>& points() const { return points_; }
  const Matrix& rows() const { return rows_; }

  bool contains(const FactorPoint& point) const;
  // Appends the point; returns false (and changes nothing) when present.
  bool add_point(const FactorPoint& point);
  // Removes the given positions (sorted ascending, deduplicated by caller).
  void remove_positions(const std::vector<Index>& positions);

 private:
  ModelSpec spec_;
  std::vector<FactorPoint> points_;
  Matrix rows_;
  std::map<FactorPoint, Index, IndexOrder> position_;
};

struct RelaxOptions {
  Scalar eps_kw = 1e-6;  // stop when max_i g_i <= (m/s) * (1 + eps_kw)
  std::int64_t max_iterations = 200'000;
};

struct RelaxSolution {
  Vector weights;         // aligned with the pool points
  Scalar budget = 0;      // s, real-valued here
  Scalar ldet_value = 0;  // ldet of the weighted information matrix
  bool converged = false;
  std::int64_t iterations = 0;
  Scalar kw_gap = 0;  // max_i g_i - m/s at exit
};

// Frank-Wolfe with away steps on {x >= 0, e^T x = s}. Toward vertex s*e_i at
// the gradient argmax, away vertex s*e_j at the support argmin, exact line
// search in closed form for both. Throws RankDeficientError when the pool
// cannot produce a positive definite information matrix.
RelaxSolution solve_restricted(const RowPool& pool, Scalar s,
                               const RelaxOptions& opts = {},
                               const Vector* warm = nullptr);

// Same relaxation with per-coordinate bounds lower <= x <= upper, solved by
// pairwise weight transfers between the best unsaturated and worst shrinkable
// coordinate, each with a closed-form rank-two line search.
RelaxSolution solve_restricted_bounded(const RowPool& pool, Scalar s,
                                       const Vector& lower, const Vector& upper,
                                       const RelaxOptions& opts = {},
                                       const Vector* warm = nullptr);

// max_i quad_form(B(x), v_i) - m/s over the pool.
Scalar kw_gap(const RowPool& pool, const RelaxSolution& sol);

enum class CertScope { pool, full };

const char* to_string(CertScope scope);

/// Feasible dual point (theta, tau): every covered row satisfies
/// v^T theta v <= tau, and -ldet(theta) + tau*s - m bounds the relaxation
/// value over the covered rows, hence every integer design drawn from them.
struct DualCertificate {
  Matrix theta;  // inverse of the weighted information matrix
  Scalar tau = 0;
  CertScope scope = CertScope::pool;
  Scalar upper_bound = 0;
  Scalar s = 0;
  ModelSpec model;
  Scalar base_ldet = 0;  // ldet B(x) = -ldet(theta), kept to avoid recomputing
};

DualCertificate dual_certificate(const RowPool& pool, const RelaxSolution& sol);

struct CompletedCertificate {
  DualCertificate certificate;  // scope = full
  PricingResult pricing;        // oracle run that completed it
};

// Prices theta over all implicit rows and raises tau to cover the worst one;
// the result bounds the full instance by weak duality, violation or not.
CompletedCertificate complete_certificate(const ModelSpec& spec,
                                          const DualCertificate& cert,
                                          const PriceOptions& popts = {});

inline PriceOptions default_rowgen_price() {
  PriceOptions popts;
  popts.top_k = 5;
  return popts;
}

struct RowGenOptions {
  RelaxOptions relax;
  PriceOptions price = default_rowgen_price();
  std::int64_t max_rounds = 50;   // pool-growing rounds before giving up
  Scalar violation_tol = 1e-9;    // relative: grow pool when q* > tau*(1+tol)
  Scalar drop_tol = 1e-9;         // drop non-seed rows below this weight
  bool drop_rows = true;
};

struct RoundStat {
  Scalar relax_value = 0;
  Scalar bound = 0;
  Index pool_size = 0;
  Scalar kw_gap = 0;
};

struct BoundReport {
  Scalar bound = 0;        // best (smallest) valid full-scope bound seen
  Scalar relax_value = 0;  // pool relaxation value of that same round
  std::int64_t rounds = 0;
  Index pool_size_final = 0;
  DualCertificate certificate;  // full scope, matches `bound`
  bool converged = false;       // oracle found no violated row
  Scalar kw_gap_final = 0;
  std::vector<RoundStat> history;
};

// Row generation: pool starts from the canonical design points, alternates
// solve / certify / price, and grows the pool with the oracle's top
// candidates until no dual constraint is violated or the round cap hits.
// Every reported bound is full-scope valid either way.
BoundReport natural_bound_rowgen(const ModelSpec& spec, std::int64_t s,
                                 const RowGenOptions& opts = {});

}  // namespace dopt
