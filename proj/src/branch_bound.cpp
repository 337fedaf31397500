#include "dopt/branch_bound.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>

namespace dopt {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

using VarBounds =
    std::map<FactorPoint, std::pair<std::int64_t, std::int64_t>, IndexOrder>;

struct Node {
  std::int64_t id = 0;
  std::int64_t parent = -1;
  int depth = 0;
  Scalar bound = kInf;  // valid bound inherited from the parent evaluation
  VarBounds var_bounds;
  std::vector<FactorPoint> pool_points;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

// Exact maximum of sum_i d_i y_i over {sum y = s, lower <= y <= upper on the
// pool coordinates, y >= 0 elsewhere} when every non-pool row has rate at
// most q_rest: pay the forced lower bounds, then fill greedily by rate.
Scalar greedy_fill(const Vector& d, const Vector& lower, const Vector& upper,
                   Scalar s, Scalar q_rest) {
  Scalar total = lower.dot(d);
  Scalar rem = s - lower.sum();
  if (rem <= 0) return total;
  std::vector<Index> order(static_cast<std::size_t>(d.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (d[a] != d[b]) return d[a] > d[b];
    return a < b;
  });
  for (const Index i : order) {
    if (d[i] <= q_rest) break;
    const Scalar take = std::min(rem, upper[i] - lower[i]);
    total += take * d[i];
    rem -= take;
    if (rem <= 0) return total;
  }
  return total + rem * q_rest;
}

struct NodeEval {
  bool feasible = true;
  Scalar bound = kInf;
  bool have_weights = false;  // node-feasible relaxation weights available
  Vector weights;
  std::vector<FactorPoint> pool_points;
  Vector lower, upper;
};

NodeEval evaluate_node(const ModelSpec& spec, std::int64_t s, const Node& node,
                       const BnbOptions& opts) {
  NodeEval ev;
  std::int64_t lo_total = 0;
  for (const auto& [point, lu] : node.var_bounds) {
    if (lu.first > lu.second) {
      ev.feasible = false;
      return ev;
    }
    lo_total += lu.first;
  }
  if (lo_total > s) {
    ev.feasible = false;
    return ev;
  }

  RowPool pool(spec, node.pool_points);
  const auto sreal = static_cast<Scalar>(s);
  const auto m = static_cast<Scalar>(spec.row_dim);

  Vector warm;
  bool have_warm = false;
  std::int64_t grows = 0;
  for (;;) {
    const Index n = pool.size();
    Vector lower = Vector::Zero(n);
    Vector upper = Vector::Constant(n, sreal);
    for (Index i = 0; i < n; ++i) {
      const auto it =
          node.var_bounds.find(pool.points()[static_cast<std::size_t>(i)]);
      if (it != node.var_bounds.end()) {
        lower[i] = static_cast<Scalar>(it->second.first);
        upper[i] = std::min(sreal, static_cast<Scalar>(it->second.second));
      }
    }

    RelaxSolution sol;
    bool bounded_ok = true;
    try {
      sol = solve_restricted_bounded(pool, sreal, lower, upper, opts.rowgen.relax,
                                     have_warm ? &warm : nullptr);
    } catch (const InfeasibleError&) {
      bounded_ok = false;
    } catch (const RankDeficientError&) {
      bounded_ok = false;
    }
    // The linearization point does not have to satisfy the node bounds; any
    // positive definite information matrix gives a valid bound, so fall back
    // to the unconstrained pool relaxation.
    if (!bounded_ok) sol = solve_restricted(pool, sreal, opts.rowgen.relax);

    const InfoMatrix B = build_info(pool.rows(), sol.weights);
    const Vector d = quad_forms(B, pool.rows());
    const PricingResult pr = price(spec, B.inverse(), opts.rowgen.price);

    Scalar q_rest = pr.best_value;
    bool found_new = false;
    for (const Candidate& cand : pr.top) {
      if (!pool.contains(cand.point)) {
        q_rest = cand.value;
        found_new = true;
        break;
      }
    }
    // Every candidate is pooled already, so any other row ranks below the
    // whole returned list.
    if (!found_new) q_rest = pr.top.back().value;
    q_rest = std::max<Scalar>(q_rest, 0);

    const Scalar bound = B.ldet() + greedy_fill(d, lower, upper, sreal, q_rest) - m;
    if (bound < ev.bound) ev.bound = bound;

    if (bounded_ok) {
      ev.have_weights = true;
      ev.weights = sol.weights;
      ev.pool_points = pool.points();
      ev.lower = lower;
      ev.upper = upper;
    }

    const Scalar tau_pool = d.maxCoeff();
    const bool violated =
        pr.best_value > tau_pool * (1 + opts.rowgen.violation_tol);
    if ((!violated && bounded_ok) || grows >= opts.rowgen.max_rounds) break;
    const Index old_size = pool.size();
    bool grew = false;
    for (const Candidate& cand : pr.top) grew = pool.add_point(cand.point) || grew;
    if (!grew) break;
    ++grows;
    warm = Vector::Zero(pool.size());
    warm.head(old_size) = sol.weights;
    have_warm = bounded_ok;
  }
  if (!ev.have_weights) ev.pool_points = pool.points();
  return ev;
}

Design round_to_design(const std::vector<FactorPoint>& points, const Vector& x,
                       std::int64_t s) {
  const auto n = static_cast<Index>(points.size());
  std::vector<std::int64_t> base(static_cast<std::size_t>(n));
  std::int64_t used = 0;
  for (Index i = 0; i < n; ++i) {
    auto k = static_cast<std::int64_t>(std::floor(x[i] + 1e-12));
    if (k < 0) k = 0;
    base[static_cast<std::size_t>(i)] = k;
    used += k;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const Scalar fa = x[a] - std::floor(x[a]);
    const Scalar fb = x[b] - std::floor(x[b]);
    if (fa != fb) return fa > fb;
    return index_less(points[static_cast<std::size_t>(a)],
                      points[static_cast<std::size_t>(b)]);
  });
  std::int64_t rem = s - used;
  for (std::int64_t r = 0; rem > 0; ++r, --rem)
    ++base[static_cast<std::size_t>(order[static_cast<std::size_t>(
        r % static_cast<std::int64_t>(n))])];
  for (std::size_t k = static_cast<std::size_t>(n); k-- > 0 && rem < 0;) {
    auto& slot = base[static_cast<std::size_t>(order[k])];
    const std::int64_t take = std::min(slot, -rem);
    slot -= take;
    rem += take;
  }
  Design out;
  out.budget = s;
  for (Index i = 0; i < n; ++i)
    if (base[static_cast<std::size_t>(i)] > 0)
      out.support.emplace(points[static_cast<std::size_t>(i)],
                          base[static_cast<std::size_t>(i)]);
  return out;
}

struct Incumbent {
  Design design;
  Scalar ldet = -kInf;
};

void try_incumbent(const ModelSpec& spec, const Design& cand, Incumbent& inc,
                   const BnbOptions& opts) {
  if (cand.support.empty() || !cand.valid()) return;
  try {
    SearchResult polished = local_search_from(spec, cand, opts.search);
    if (polished.ldet > inc.ldet + 1e-12) {
      inc.design = std::move(polished.design);
      inc.ldet = polished.ldet;
    }
  } catch (const RankDeficientError&) {
  }
}

struct BranchChoice {
  bool found = false;
  FactorPoint point;
  std::int64_t split = 0;  // children: x <= split and x >= split + 1
};

BranchChoice pick_branch(const NodeEval& ev, const VarBounds& vb,
                         std::int64_t s) {
  BranchChoice out;
  if (!ev.have_weights) {
    // No relaxation info: split the smallest-index pool var with room.
    std::vector<FactorPoint> pts = ev.pool_points;
    std::sort(pts.begin(), pts.end(), index_less);
    for (const auto& point : pts) {
      std::int64_t lo = 0, hi = s;
      const auto it = vb.find(point);
      if (it != vb.end()) {
        lo = it->second.first;
        hi = std::min<std::int64_t>(s, it->second.second);
      }
      if (lo < hi) {
        out.found = true;
        out.point = point;
        out.split = lo;
        return out;
      }
    }
    return out;
  }
  const auto n = static_cast<Index>(ev.pool_points.size());
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return index_less(ev.pool_points[static_cast<std::size_t>(a)],
                      ev.pool_points[static_cast<std::size_t>(b)]);
  });
  Scalar best_score = -1;
  Index best_pos = -1;
  for (const Index pos : order) {
    if (ev.lower[pos] >= ev.upper[pos]) continue;
    const Scalar frac = ev.weights[pos] - std::floor(ev.weights[pos]);
    const Scalar score = std::min(frac, 1 - frac);
    if (score > best_score) {
      best_score = score;
      best_pos = pos;
    }
  }
  if (best_pos < 0) return out;
  out.found = true;
  out.point = ev.pool_points[static_cast<std::size_t>(best_pos)];
  auto split = static_cast<std::int64_t>(std::floor(ev.weights[best_pos]));
  const auto lo = static_cast<std::int64_t>(ev.lower[best_pos]);
  const auto hi = static_cast<std::int64_t>(ev.upper[best_pos]);
  split = std::clamp(split, lo, hi - 1);
  out.split = split;
  return out;
}

}  // namespace

BnbResult solve_exact(const ModelSpec& spec, std::int64_t s,
                      const BnbOptions& opts) {
  const auto start_time = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<Scalar>(std::chrono::steady_clock::now() -
                                         start_time)
        .count();
  };

  Incumbent inc;
  {
    SearchResult first = local_search(spec, s, opts.search);
    inc.design = std::move(first.design);
    inc.ldet = first.ldet;
  }

  BnbResult res;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  {
    Node root;
    root.id = 0;
    const Design seed = initial_design(spec, s);
    for (const auto& [point, mult] : seed.support) root.pool_points.push_back(point);
    open.push(std::move(root));
  }
  std::int64_t next_id = 1;
  std::int64_t explored = 0;
  bool capped = false;

  while (!open.empty()) {
    if (explored >= opts.node_cap ||
        (opts.time_cap_seconds > 0 && elapsed() >= opts.time_cap_seconds)) {
      capped = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (node.bound <= inc.ldet + opts.eps_gap) {
      res.trace.push_back(
          {node.id, node.parent, node.depth, node.bound, node.bound, true});
      continue;
    }
    ++explored;
    NodeEval ev = evaluate_node(spec, s, node, opts);
    if (!ev.feasible) {
      res.trace.push_back(
          {node.id, node.parent, node.depth, -kInf, node.bound, true});
      continue;
    }
    const Scalar bound = std::min(ev.bound, node.bound);
    if (ev.have_weights)
      try_incumbent(spec, round_to_design(ev.pool_points, ev.weights, s), inc,
                    opts);
    if (bound <= inc.ldet + opts.eps_gap) {
      res.trace.push_back(
          {node.id, node.parent, node.depth, bound, node.bound, true});
      continue;
    }
    const BranchChoice br = pick_branch(ev, node.var_bounds, s);
    res.trace.push_back(
        {node.id, node.parent, node.depth, bound, node.bound, !br.found});
    if (!br.found) continue;

    auto bounds_of = [&](const FactorPoint& point) {
      const auto it = node.var_bounds.find(point);
      return it != node.var_bounds.end()
                 ? it->second
                 : std::pair<std::int64_t, std::int64_t>{0, s};
    };
    const auto [lo, hi] = bounds_of(br.point);
    Node down;  // x_point <= split
    down.id = next_id++;
    down.parent = node.id;
    down.depth = node.depth + 1;
    down.bound = bound;
    down.var_bounds = node.var_bounds;
    down.var_bounds[br.point] = {lo, br.split};
    down.pool_points = ev.pool_points;
    Node up;  // x_point >= split + 1
    up.id = next_id++;
    up.parent = node.id;
    up.depth = node.depth + 1;
    up.bound = bound;
    up.var_bounds = node.var_bounds;
    up.var_bounds[br.point] = {br.split + 1, hi};
    up.pool_points = ev.pool_points;
    open.push(std::move(down));
    open.push(std::move(up));
  }

  res.design = inc.design;
  res.proof.optimal_ldet = inc.ldet;
  res.proof.nodes_explored = explored;
  res.proof.proven = open.empty();
  res.proof.final_gap =
      open.empty() ? 0 : std::max<Scalar>(0, open.top().bound - inc.ldet);
  (void)capped;
  return res;
}

}  // namespace dopt
