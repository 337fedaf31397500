#include "dopt/local_search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "dopt/parallel.hpp"

namespace dopt {

namespace {

std::vector<FactorPoint> starter_points(const ModelSpec& spec) {
  const int F = spec.factors;
  std::vector<FactorPoint> pts;
  const FactorPoint zero(static_cast<std::size_t>(F), 0);
  pts.push_back(zero);
  for (int i = 0; i < F; ++i) {
    FactorPoint p = zero;
    p[static_cast<std::size_t>(i)] = 1;
    pts.push_back(std::move(p));
  }
  if (spec.kind == ModelKind::quadratic) {
    for (int i = 0; i < F; ++i) {
      FactorPoint p = zero;
      p[static_cast<std::size_t>(i)] = 2;
      pts.push_back(std::move(p));
    }
    for (int i = 0; i < F; ++i)
      for (int j = i + 1; j < F; ++j) {
        FactorPoint p = zero;
        p[static_cast<std::size_t>(i)] = 1;
        p[static_cast<std::size_t>(j)] = 1;
        pts.push_back(std::move(p));
      }
  }
  return pts;
}

// One support row at a time: downdate, price the reduced inverse, keep the
// largest gain. Works for every model kind.
BestExchange scan_per_row(const ModelSpec& spec, const DesignRows& dr,
                          const InfoMatrix& info, const SearchOptions& opts) {
  BestExchange out;
  const Scalar threshold =
      opts.eps_imp * std::max<Scalar>(1, std::abs(info.ldet()));
  PriceOptions po = opts.price;
  po.top_k = 1;
  if (po.threads == 0) po.threads = opts.threads;
  for (std::size_t j = 0; j < dr.points.size(); ++j) {
    const Vector vj = dr.rows.row(static_cast<Index>(j)).transpose();
    const auto removed = info.downdated(vj);
    if (!removed) {
      ++out.skipped_singular;
      continue;
    }
    const PricingResult pr = price(spec, removed->inverse(), po);
    if (pr.best_point == dr.points[j]) continue;
    const Scalar delta =
        exchange_delta(info.ldet(), removed->ldet(), pr.best_value);
    if (delta <= threshold) continue;
    if (!out.move || delta > out.move->delta_ldet)
      out.move = ExchangeMove{dr.points[j], pr.best_point, delta};
  }
  return out;
}

// Linear models: (B - v_j v_j^T)^{-1} = B^{-1} + u_j u_j^T / (1 - q_j) with
// u_j = B^{-1} v_j, so every leaving row can be priced in the same vertex
// enumeration by tracking v^T u_j alongside v^T B^{-1} v. One pass over the
// 2^F vertices replaces one oracle call per support row.
BestExchange scan_linear_fused(const ModelSpec& spec, const DesignRows& dr,
                               const InfoMatrix& info, const SearchOptions& opts) {
  if (spec.factors > 40)
    throw CapacityError(
        "oracle capacity exceeded: 2^F vertex enumeration needs F <= 40");
  const int F = spec.factors;
  const Scalar hi = static_cast<Scalar>(spec.levels - 1);
  const auto J = static_cast<Index>(dr.points.size());

  BestExchange out;
  const Matrix Binv = info.inverse();
  const Vector qs = quad_forms(info, dr.rows);
  Matrix U(info.dim(), J);
  for (Index j = 0; j < J; ++j)
    U.col(j) = info.solve(dr.rows.row(j).transpose());
  std::vector<char> active(static_cast<std::size_t>(J), 1);
  Vector inv_den = Vector::Zero(J);
  for (Index j = 0; j < J; ++j) {
    if (1 - qs[j] <= kEpsPsd) {
      active[static_cast<std::size_t>(j)] = 0;
      ++out.skipped_singular;
    } else {
      inv_den[j] = 1 / (1 - qs[j]);
    }
  }

  struct Slot {
    Scalar value = -std::numeric_limits<Scalar>::infinity();
    std::uint64_t code = 0;
  };
  const std::uint64_t count = std::uint64_t{1} << F;
  const std::uint64_t nblocks =
      (count + detail::kRefreshPeriod - 1) / detail::kRefreshPeriod;
  const int threads = resolve_threads(opts.threads);
  std::vector<std::vector<Slot>> outputs(
      static_cast<std::size_t>(std::min<std::uint64_t>(threads, nblocks)),
      std::vector<Slot>(static_cast<std::size_t>(J)));

  run_chunked(nblocks, threads, [&](int worker, std::uint64_t b0, std::uint64_t b1) {
    const std::uint64_t begin = b0 * detail::kRefreshPeriod;
    const std::uint64_t end = std::min(b1 * detail::kRefreshPeriod, count);
    auto& slots = outputs[static_cast<std::size_t>(worker)];

    FactorPoint alpha(static_cast<std::size_t>(F), 0);
    Vector v, w, p;
    Scalar base = 0;
    const auto refresh = [&](std::uint64_t t) {
      const std::uint64_t gray = t ^ (t >> 1);
      for (int k = 0; k < F; ++k)
        alpha[static_cast<std::size_t>(k)] = (gray >> k) & 1 ? spec.levels - 1 : 0;
      v = expand_row(spec, alpha);
      w.noalias() = Binv * v;
      base = v.dot(w);
      p.noalias() = U.transpose() * v;
    };
    refresh(begin);

    for (std::uint64_t t = begin; t < end; ++t) {
      if (t != begin && t % detail::kRefreshPeriod == 0) refresh(t);
      const std::uint64_t code = t ^ (t >> 1);
      for (Index j = 0; j < J; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const Scalar val = base + p[j] * p[j] * inv_den[j];
        Slot& sl = slots[static_cast<std::size_t>(j)];
        if (val > sl.value || (val == sl.value && code < sl.code)) {
          sl.value = val;
          sl.code = code;
        }
      }
      if (t + 1 < end) {
        const int b = std::countr_zero(t + 1);
        const Index idx = 1 + b;
        const Scalar delta = alpha[static_cast<std::size_t>(b)] == 0 ? hi : -hi;
        base += 2 * delta * w[idx] + delta * delta * Binv(idx, idx);
        w.noalias() += delta * Binv.col(idx);
        p.noalias() += delta * U.row(idx).transpose();
        v[idx] += delta;
        alpha[static_cast<std::size_t>(b)] =
            alpha[static_cast<std::size_t>(b)] == 0 ? spec.levels - 1 : 0;
      }
    }
  });

  const Scalar threshold =
      opts.eps_imp * std::max<Scalar>(1, std::abs(info.ldet()));
  for (Index j = 0; j < J; ++j) {
    if (!active[static_cast<std::size_t>(j)]) continue;
    Slot best;
    for (const auto& slots : outputs) {
      const Slot& sl = slots[static_cast<std::size_t>(j)];
      if (sl.value > best.value || (sl.value == best.value && sl.code < best.code))
        best = sl;
    }
    FactorPoint enter(static_cast<std::size_t>(F), 0);
    for (int k = 0; k < F; ++k)
      enter[static_cast<std::size_t>(k)] =
          (best.code >> k) & 1 ? spec.levels - 1 : 0;
    if (enter == dr.points[static_cast<std::size_t>(j)]) continue;
    const Vector v = expand_row(spec, enter);
    const Scalar pj = v.dot(U.col(j));
    const Scalar q = v.dot(Binv * v) + pj * pj * inv_den[j];
    const Scalar delta = std::log1p(q) + std::log1p(-qs[j]);
    if (delta <= threshold) continue;
    if (!out.move || delta > out.move->delta_ldet)
      out.move =
          ExchangeMove{dr.points[static_cast<std::size_t>(j)], enter, delta};
  }
  return out;
}

Design perturbed_start(const ModelSpec& spec, const Design& base,
                       std::mt19937_64& rng) {
  Design out = base;
  std::uniform_int_distribution<int> level_dist(0, spec.levels - 1);
  for (int attempt = 0; attempt < spec.factors; ++attempt) {
    std::uniform_int_distribution<std::size_t> pick(0, out.support.size() - 1);
    const auto it = std::next(out.support.begin(),
                              static_cast<std::ptrdiff_t>(pick(rng)));
    const FactorPoint leave = it->first;
    FactorPoint enter(static_cast<std::size_t>(spec.factors));
    for (auto& level : enter) level = level_dist(rng);
    if (enter == leave) continue;
    Design trial = out;
    trial.remove_unit(leave);
    trial.add_unit(enter);
    const DesignRows dr = design_rows(spec, trial);
    try {
      build_info(dr.rows, dr.mults);
    } catch (const RankDeficientError&) {
      continue;
    }
    out = std::move(trial);
  }
  return out;
}

}  // namespace

Design initial_design(const ModelSpec& spec, std::int64_t s) {
  if (spec.kind == ModelKind::quadratic && spec.levels < 3)
    throw std::invalid_argument("quadratic model needs L >= 3");
  if (s < spec.row_dim)
    throw InfeasibleError("infeasible budget: s = " + std::to_string(s) +
                          " is below the row dimension m = " +
                          std::to_string(spec.row_dim));
  Design design;
  design.budget = s;
  for (auto& point : starter_points(spec))
    design.support.emplace(std::move(point), 0);
  const auto m = static_cast<std::int64_t>(design.support.size());
  const std::int64_t base = s / m;
  std::int64_t extras = s % m;
  for (auto& [point, mult] : design.support) {
    mult = base + (extras > 0 ? 1 : 0);
    if (extras > 0) --extras;
  }
  return design;
}

BestExchange best_exchange(const ModelSpec& spec, const Design& design,
                           const InfoMatrix& info, const SearchOptions& opts) {
  const DesignRows dr = design_rows(spec, design);
  if (spec.kind == ModelKind::linear && opts.fused_linear_scan)
    return scan_linear_fused(spec, dr, info, opts);
  return scan_per_row(spec, dr, info, opts);
}

SearchResult local_search_from(const ModelSpec& spec, const Design& start,
                               const SearchOptions& opts) {
  if (!start.valid())
    throw std::invalid_argument("design multiplicities do not sum to its budget");
  Design design = start;
  DesignRows dr = design_rows(spec, design);
  InfoMatrix info = build_info(dr.rows, dr.mults);

  SearchResult res;
  res.trace.initial_ldet = info.ldet();
  std::int64_t steps = 0;
  for (;;) {
    if (opts.max_iterations >= 0 && steps >= opts.max_iterations) break;
    const BestExchange be = best_exchange(spec, design, info, opts);
    res.trace.skipped_singular += be.skipped_singular;
    if (!be.move) break;
    const Vector leave_row = expand_row(spec, be.move->leave);
    const Vector enter_row = expand_row(spec, be.move->enter);
    design.remove_unit(be.move->leave);
    design.add_unit(be.move->enter);
    ++steps;
    std::optional<InfoMatrix> removed;
    if (steps % 64 != 0) removed = info.downdated(leave_row);
    if (removed) {
      info = removed->updated(enter_row);
    } else {
      dr = design_rows(spec, design);
      info = build_info(dr.rows, dr.mults);
    }
    res.trace.steps.push_back({info.ldet(), *be.move});
  }
  res.design = std::move(design);
  res.ldet = info.ldet();
  return res;
}

SearchResult local_search(const ModelSpec& spec, std::int64_t s,
                          const SearchOptions& opts) {
  const Design start = initial_design(spec, s);
  SearchResult best = local_search_from(spec, start, opts);
  if (opts.starts <= 1) return best;
  std::mt19937_64 rng(opts.seed);
  for (int r = 1; r < opts.starts; ++r) {
    const Design jiggled = perturbed_start(spec, start, rng);
    SearchResult run = local_search_from(spec, jiggled, opts);
    if (run.ldet > best.ldet) best = std::move(run);
  }
  return best;
}

}  // namespace dopt
