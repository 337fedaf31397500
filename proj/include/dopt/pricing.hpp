#pragma once

#include <cstdint>
#include <vector>

#include "dopt/model.hpp"
#include "dopt/types.hpp"

namespace dopt {

struct PriceOptions {
  std::uint64_t eval_cap = 100'000'000;  // max candidates to enumerate
  int top_k = 1;                         // distinct candidates to return
  int threads = 0;                       // 0 = default
};

struct Candidate {
  FactorPoint point;
  Scalar value = 0;
};

struct PricingResult {
  FactorPoint best_point;
  Scalar best_value = 0;
  std::uint64_t evaluated = 0;
  std::vector<Candidate> top;  // best first; ties by smallest encoded index
  Scalar max_drift = 0;        // incremental-vs-fresh relative drift seen
};

// Exact maximizer of v(alpha)^T Q v(alpha) over the implicit row set, Q
// symmetric PSD. Dispatches on the model kind; ties broken by smallest
// encoded row index. Results are independent of the worker count.
PricingResult price(const ModelSpec& spec, const Matrix& Q,
                    const PriceOptions& opts = {});

// Linear model: the objective is convex in alpha, so the maximum over the box
// is attained at a vertex; only the 2^F points with levels in {0, L-1} are
// enumerated, in Gray-code order with O(m) work per step.
PricingResult price_linear_vertices(const ModelSpec& spec, const Matrix& Q,
                                    const PriceOptions& opts = {});

// Quadratic model: quartic objective, solved exactly by odometer enumeration
// of all L^F points with incremental row and product updates.
PricingResult price_quadratic_enumerate(const ModelSpec& spec, const Matrix& Q,
                                        const PriceOptions& opts = {});

namespace detail {

// Total order used for pricing ties: larger value first, then smaller row.
inline bool candidate_better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value > b.value;
  return index_less(a.point, b.point);
}

// Fixed-capacity best-k accumulator, kept sorted best-first.
class TopAccumulator {
 public:
  explicit TopAccumulator(int k) : k_(k) {}

  void push(const FactorPoint& point, Scalar value);
  std::vector<Candidate> take() { return std::move(items_); }

 private:
  int k_;
  std::vector<Candidate> items_;
};

inline constexpr std::uint64_t kRefreshPeriod = 1000;

}  // namespace detail

}  // namespace dopt
