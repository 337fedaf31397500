#include "dopt/pricing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>

#include "dopt/parallel.hpp"

namespace dopt {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DOPT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {

void TopAccumulator::push(const FactorPoint& point, Scalar value) {
  if (static_cast<int>(items_.size()) == k_) {
    const Candidate& worst = items_.back();
    if (value < worst.value) return;
    if (value == worst.value && !index_less(point, worst.point)) return;
    items_.pop_back();
  }
  Candidate cand{point, value};
  auto it = std::lower_bound(items_.begin(), items_.end(), cand, candidate_better);
  items_.insert(it, std::move(cand));
}

}  // namespace detail

namespace {

using detail::candidate_better;
using detail::kRefreshPeriod;
using detail::TopAccumulator;

void check_kernel(const ModelSpec& spec, const Matrix& Q) {
  if (Q.rows() != spec.row_dim || Q.cols() != spec.row_dim)
    throw std::invalid_argument("pricing kernel dimension does not match model");
  const Scalar scale = std::max<Scalar>(1, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("pricing kernel must be symmetric");
}

std::optional<std::uint64_t> pow_checked(std::uint64_t base, int exp) {
  std::uint64_t out = 1;
  for (int i = 0; i < exp; ++i) {
    if (out > UINT64_MAX / base) return std::nullopt;
    out *= base;
  }
  return out;
}

struct WorkerOutput {
  std::vector<Candidate> top;
  Scalar max_drift = 0;
};

// Merges per-worker candidate lists, re-evaluates the survivors from scratch
// and assembles the result. Worker ranges are disjoint, so no deduplication
// is needed.
PricingResult finish(const ModelSpec& spec, const Matrix& Q,
                     std::vector<WorkerOutput>& outputs, std::uint64_t evaluated,
                     int top_k) {
  std::vector<Candidate> merged;
  Scalar drift = 0;
  for (auto& out : outputs) {
    merged.insert(merged.end(), out.top.begin(), out.top.end());
    drift = std::max(drift, out.max_drift);
  }
  std::sort(merged.begin(), merged.end(), candidate_better);
  if (static_cast<int>(merged.size()) > top_k) merged.resize(top_k);
  for (auto& cand : merged) {
    const Vector v = expand_row(spec, cand.point);
    cand.value = v.dot(Q * v);
  }
  std::sort(merged.begin(), merged.end(), candidate_better);
  PricingResult result;
  result.best_point = merged.front().point;
  result.best_value = merged.front().value;
  result.evaluated = evaluated;
  result.top = std::move(merged);
  result.max_drift = drift;
  return result;
}

}  // namespace

PricingResult price_linear_vertices(const ModelSpec& spec, const Matrix& Q,
                                    const PriceOptions& opts) {
  if (spec.kind != ModelKind::linear)
    throw std::invalid_argument("vertex pricing requires a linear model");
  check_kernel(spec, Q);
  if (spec.factors > 40)
    throw CapacityError("oracle capacity exceeded: 2^F vertex enumeration needs F <= 40");
  const int F = spec.factors;
  const Scalar hi = static_cast<Scalar>(spec.levels - 1);
  const std::uint64_t count = std::uint64_t{1} << F;

  const std::uint64_t nblocks = (count + kRefreshPeriod - 1) / kRefreshPeriod;
  const int threads = resolve_threads(opts.threads);
  std::vector<WorkerOutput> outputs(
      static_cast<std::size_t>(std::min<std::uint64_t>(threads, nblocks)));

  run_chunked(nblocks, threads, [&](int worker, std::uint64_t b0, std::uint64_t b1) {
    const std::uint64_t begin = b0 * kRefreshPeriod;
    const std::uint64_t end = std::min(b1 * kRefreshPeriod, count);
    TopAccumulator top(opts.top_k);
    Scalar drift = 0;

    FactorPoint alpha(F, 0);
    Vector v, w;
    Scalar val = 0;
    const auto refresh = [&](std::uint64_t t) {
      const std::uint64_t gray = t ^ (t >> 1);
      for (int k = 0; k < F; ++k)
        alpha[k] = (gray >> k) & 1 ? spec.levels - 1 : 0;
      v = expand_row(spec, alpha);
      w.noalias() = Q * v;
      val = v.dot(w);
    };
    refresh(begin);

    for (std::uint64_t t = begin; t < end; ++t) {
      if (t != begin && t % kRefreshPeriod == 0) {
        const Scalar incremental = val;
        refresh(t);
        drift = std::max(drift, std::abs(incremental - val) /
                                    std::max<Scalar>(1, std::abs(val)));
      }
      top.push(alpha, val);
      if (t + 1 < end) {
        const int b = std::countr_zero(t + 1);
        const Index idx = 1 + b;
        const Scalar delta = alpha[b] == 0 ? hi : -hi;
        val += 2 * delta * w[idx] + delta * delta * Q(idx, idx);
        w.noalias() += delta * Q.col(idx);
        v[idx] += delta;
        alpha[b] = alpha[b] == 0 ? spec.levels - 1 : 0;
      }
    }
    outputs[worker].top = top.take();
    outputs[worker].max_drift = drift;
  });
  return finish(spec, Q, outputs, count, opts.top_k);
}

PricingResult price_quadratic_enumerate(const ModelSpec& spec, const Matrix& Q,
                                        const PriceOptions& opts) {
  if (spec.kind != ModelKind::quadratic)
    throw std::invalid_argument("grid pricing requires a quadratic model");
  check_kernel(spec, Q);
  const auto count = pow_checked(static_cast<std::uint64_t>(spec.levels), spec.factors);
  if (!count || *count > opts.eval_cap)
    throw CapacityError("oracle capacity exceeded: L^F grid larger than evaluation cap");
  const int F = spec.factors;
  const int L = spec.levels;
  const int m = spec.row_dim;

  const std::uint64_t nblocks = (*count + kRefreshPeriod - 1) / kRefreshPeriod;
  const int threads = resolve_threads(opts.threads);
  std::vector<WorkerOutput> outputs(
      static_cast<std::size_t>(std::min<std::uint64_t>(threads, nblocks)));

  run_chunked(nblocks, threads, [&](int worker, std::uint64_t b0, std::uint64_t b1) {
    const std::uint64_t begin = b0 * kRefreshPeriod;
    const std::uint64_t end = std::min(b1 * kRefreshPeriod, *count);
    TopAccumulator top(opts.top_k);
    Scalar drift = 0;

    FactorPoint alpha = decode_point(spec, begin);
    Vector v, w;
    Vector u(m);  // scratch: Q * (sparse row delta)
    Scalar val = 0;
    std::vector<Index> didx(static_cast<std::size_t>(F) + 1);
    std::vector<Scalar> dval(static_cast<std::size_t>(F) + 1);

    const auto refresh = [&] {
      v = expand_row(spec, alpha);
      w.noalias() = Q * v;
      val = v.dot(w);
    };
    refresh();

    // Changes factor k from level a to level b, updating v, w and val with
    // O(F m) work: only 2 + (F-1) entries of v move.
    const auto apply_change = [&](int k, Level a, Level b) {
      const Scalar da = static_cast<Scalar>(a);
      const Scalar db = static_cast<Scalar>(b);
      int nd = 0;
      didx[nd] = 1 + k;
      dval[nd++] = db - da;
      didx[nd] = 1 + F + k;
      dval[nd++] = db * db - da * da;
      for (int t = 0; t < F; ++t) {
        if (t == k) continue;
        didx[nd] = cross_term_index(spec, std::min(t, k), std::max(t, k));
        dval[nd++] = static_cast<Scalar>(alpha[t]) * (db - da);
      }
      u.noalias() = dval[0] * Q.col(didx[0]);
      for (int j = 1; j < nd; ++j) u.noalias() += dval[j] * Q.col(didx[j]);
      Scalar dot_dw = 0, dot_du = 0;
      for (int j = 0; j < nd; ++j) {
        dot_dw += dval[j] * w[didx[j]];
        dot_du += dval[j] * u[didx[j]];
      }
      val += 2 * dot_dw + dot_du;
      w += u;
      for (int j = 0; j < nd; ++j) v[didx[j]] += dval[j];
      alpha[k] = b;
    };

    for (std::uint64_t idx = begin; idx < end; ++idx) {
      if (idx != begin && idx % kRefreshPeriod == 0) {
        const Scalar incremental = val;
        refresh();
        drift = std::max(drift, std::abs(incremental - val) /
                                    std::max<Scalar>(1, std::abs(val)));
      }
      top.push(alpha, val);
      if (idx + 1 < end) {
        for (int pos = 0;; ++pos) {
          const Level a = alpha[pos];
          const Level b = a + 1 == L ? 0 : a + 1;
          apply_change(pos, a, b);
          if (b != 0) break;
        }
      }
    }
    outputs[worker].top = top.take();
    outputs[worker].max_drift = drift;
  });
  return finish(spec, Q, outputs, *count, opts.top_k);
}

PricingResult price(const ModelSpec& spec, const Matrix& Q, const PriceOptions& opts) {
  return spec.kind == ModelKind::linear ? price_linear_vertices(spec, Q, opts)
                                        : price_quadratic_enumerate(spec, Q, opts);
}

}  // namespace dopt
