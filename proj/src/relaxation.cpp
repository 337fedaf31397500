#include "dopt/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dopt/local_search.hpp"

namespace dopt {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
constexpr std::int64_t kRebuildPeriod = 64;

InfoMatrix build_weighted(const RowPool& pool, const Vector& x) {
  return build_info(pool.rows(), x);
}

}  // namespace

RowPool::RowPool(const ModelSpec& spec, const std::vector<FactorPoint>& points)
    : spec_(spec) {
  rows_.resize(0, spec.row_dim);
  for (const auto& point : points) add_point(point);
}

bool RowPool::contains(const FactorPoint& point) const {
  return position_.count(point) > 0;
}

bool RowPool::add_point(const FactorPoint& point) {
  if (!point_in_range(spec_, point))
    throw std::invalid_argument("pool point outside the factor grid");
  if (contains(point)) return false;
  const Index pos = size();
  position_.emplace(point, pos);
  points_.push_back(point);
  rows_.conservativeResize(pos + 1, Eigen::NoChange);
  rows_.row(pos) = expand_row(spec_, point).transpose();
  return true;
}

void RowPool::remove_positions(const std::vector<Index>& positions) {
  if (positions.empty()) return;
  std::vector<char> dead(points_.size(), 0);
  for (const Index pos : positions) dead.at(static_cast<std::size_t>(pos)) = 1;
  std::vector<FactorPoint> kept;
  kept.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (!dead[i]) kept.push_back(points_[i]);
  RowPool next(spec_, kept);
  *this = std::move(next);
}

RelaxSolution solve_restricted(const RowPool& pool, Scalar s,
                               const RelaxOptions& opts, const Vector* warm) {
  const Index n = pool.size();
  const auto m = static_cast<Scalar>(pool.model().row_dim);
  if (n == 0) throw std::invalid_argument("empty row pool");
  if (!(s > 0)) throw std::invalid_argument("budget must be positive");

  Vector x;
  if (warm && warm->size() == n && warm->sum() > 0 && warm->minCoeff() >= 0)
    x = *warm * (s / warm->sum());
  else
    x = Vector::Constant(n, s / static_cast<Scalar>(n));

  InfoMatrix B = build_weighted(pool, x);
  const Scalar target = m / s;

  RelaxSolution out;
  out.budget = s;
  std::int64_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (it > 0 && it % kRebuildPeriod == 0) {
      x *= s / x.sum();
      B = build_weighted(pool, x);
    }
    const Vector d = quad_forms(B, pool.rows());
    Index imax = 0;
    const Scalar dmax = d.maxCoeff(&imax);
    if (dmax - target <= opts.eps_kw * target) {
      out.converged = true;
      break;
    }
    Index jmin = -1;
    Scalar dmin = kInf;
    for (Index i = 0; i < n; ++i)
      if (x[i] > 0 && d[i] < dmin) {
        dmin = d[i];
        jmin = i;
      }
    const Scalar gain_toward = s * dmax - m;
    const Scalar gain_away = jmin >= 0 && x[jmin] < s ? m - s * dmin : -kInf;
    if (gain_toward >= gain_away) {
      const Scalar sigma = s * dmax;
      const Scalar t = (sigma - m) / (m * (sigma - 1));
      const Vector v = pool.rows().row(imax).transpose();
      B = B.scaled(1 - t).updated(std::sqrt(t * s) * v);
      x *= 1 - t;
      x[imax] += t * s;
    } else {
      const Scalar sigma = s * dmin;
      const Scalar t_max = x[jmin] / (s - x[jmin]);
      Scalar t = sigma > 1 ? (m - sigma) / (m * (sigma - 1)) : kInf;
      const bool drop = t >= t_max;
      if (drop) t = t_max;
      const Vector v = pool.rows().row(jmin).transpose();
      auto stepped = B.scaled(1 + t).downdated(std::sqrt(t * s) * v);
      x *= 1 + t;
      x[jmin] = drop ? 0 : x[jmin] - t * s;
      if (stepped)
        B = std::move(*stepped);
      else
        B = build_weighted(pool, x);
    }
  }

  x *= s / x.sum();
  B = build_weighted(pool, x);
  const Vector d = quad_forms(B, pool.rows());
  out.weights = std::move(x);
  out.ldet_value = B.ldet();
  out.iterations = it;
  out.kw_gap = d.maxCoeff() - target;
  return out;
}

RelaxSolution solve_restricted_bounded(const RowPool& pool, Scalar s,
                                       const Vector& lower, const Vector& upper,
                                       const RelaxOptions& opts, const Vector* warm) {
  const Index n = pool.size();
  const auto m = static_cast<Scalar>(pool.model().row_dim);
  if (lower.size() != n || upper.size() != n)
    throw std::invalid_argument("bound vectors must match the pool size");
  if ((lower.array() < 0).any() || (upper.array() < lower.array()).any())
    throw std::invalid_argument("weight bounds must satisfy 0 <= lower <= upper");
  const Scalar lo_sum = lower.sum();
  const Scalar hi_sum = upper.sum();
  if (lo_sum > s + 1e-9 || hi_sum < s - 1e-9)
    throw InfeasibleError("weight bounds leave no room for the budget");

  const auto repair = [&](Vector& y) {
    y = y.cwiseMax(lower).cwiseMin(upper);
    const Scalar diff = s - y.sum();
    if (diff > 0) {
      const Vector head = upper - y;
      const Scalar cap = head.sum();
      if (cap > 0) y += head * std::min<Scalar>(1, diff / cap);
    } else if (diff < 0) {
      const Vector foot = y - lower;
      const Scalar cap = foot.sum();
      if (cap > 0) y -= foot * std::min<Scalar>(1, -diff / cap);
    }
  };

  Vector x;
  if (warm && warm->size() == n) {
    x = *warm;
  } else {
    const Scalar room = hi_sum - lo_sum;
    x = room > 0 ? Vector(lower + (upper - lower) * ((s - lo_sum) / room))
                 : Vector(lower);
  }
  repair(x);

  InfoMatrix B = build_weighted(pool, x);
  const Scalar target = m / s;
  const Scalar slack = 1e-12 * s;

  RelaxSolution out;
  out.budget = s;
  std::int64_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (it > 0 && it % kRebuildPeriod == 0) B = build_weighted(pool, x);
    const Vector d = quad_forms(B, pool.rows());
    Index i = -1, j = -1;
    Scalar di = -kInf, dj = kInf;
    for (Index k = 0; k < n; ++k) {
      if (x[k] < upper[k] - slack && d[k] > di) {
        di = d[k];
        i = k;
      }
      if (x[k] > lower[k] + slack && d[k] < dj) {
        dj = d[k];
        j = k;
      }
    }
    if (i < 0 || j < 0 || i == j) {
      out.converged = true;
      break;
    }
    const Scalar a = di - dj;
    if (a <= opts.eps_kw * target) {
      out.converged = true;
      break;
    }
    const Scalar t_max = std::min(upper[i] - x[i], x[j] - lower[j]);
    const Vector vi = pool.rows().row(i).transpose();
    const Vector vj = pool.rows().row(j).transpose();
    const Vector yi = B.factor().triangularView<Eigen::Lower>().solve(vi);
    const Vector yj = B.factor().triangularView<Eigen::Lower>().solve(vj);
    const Scalar kij = yi.dot(yj);
    const Scalar b = di * dj - kij * kij;
    Scalar t = b > 0 ? a / (2 * b) : kInf;
    if (t > t_max) t = t_max;
    if (!(t > 0)) break;
    auto stepped = B.updated(std::sqrt(t) * vi).downdated(std::sqrt(t) * vj);
    x[i] += t;
    x[j] -= t;
    if (upper[i] - x[i] < slack) x[i] = upper[i];
    if (x[j] - lower[j] < slack) x[j] = lower[j];
    if (stepped)
      B = std::move(*stepped);
    else
      B = build_weighted(pool, x);
  }

  repair(x);
  B = build_weighted(pool, x);
  const Vector d = quad_forms(B, pool.rows());
  out.weights = std::move(x);
  out.ldet_value = B.ldet();
  out.iterations = it;
  out.kw_gap = d.maxCoeff() - target;
  return out;
}

Scalar kw_gap(const RowPool& pool, const RelaxSolution& sol) {
  InfoMatrix B = build_info(pool.rows(), sol.weights);
  const Vector d = quad_forms(B, pool.rows());
  return d.maxCoeff() -
         static_cast<Scalar>(pool.model().row_dim) / sol.budget;
}

const char* to_string(CertScope scope) {
  return scope == CertScope::pool ? "pool" : "full";
}

DualCertificate dual_certificate(const RowPool& pool, const RelaxSolution& sol) {
  InfoMatrix B = build_info(pool.rows(), sol.weights);
  DualCertificate cert;
  cert.theta = B.inverse();
  cert.tau = quad_forms(B, pool.rows()).maxCoeff();
  cert.scope = CertScope::pool;
  cert.s = sol.budget;
  cert.model = pool.model();
  cert.base_ldet = B.ldet();
  cert.upper_bound =
      cert.base_ldet + cert.tau * cert.s - static_cast<Scalar>(B.dim());
  return cert;
}

CompletedCertificate complete_certificate(const ModelSpec& spec,
                                          const DualCertificate& cert,
                                          const PriceOptions& popts) {
  if (cert.theta.rows() != spec.row_dim)
    throw std::invalid_argument("certificate does not match the model");
  CompletedCertificate out;
  out.pricing = price(spec, cert.theta, popts);
  out.certificate = cert;
  out.certificate.tau = std::max(cert.tau, out.pricing.best_value);
  out.certificate.scope = CertScope::full;
  out.certificate.upper_bound = cert.base_ldet + out.certificate.tau * cert.s -
                                static_cast<Scalar>(spec.row_dim);
  return out;
}

BoundReport natural_bound_rowgen(const ModelSpec& spec, std::int64_t s,
                                 const RowGenOptions& opts) {
  const Design seed = initial_design(spec, s);
  std::vector<FactorPoint> seed_points;
  seed_points.reserve(seed.support.size());
  for (const auto& [point, mult] : seed.support) seed_points.push_back(point);
  RowPool pool(spec, seed_points);
  const Index seeded = pool.size();  // the seed rows are never dropped

  BoundReport report;
  report.bound = kInf;
  Vector warm;
  bool have_warm = false;
  std::int64_t additions = 0;
  for (;;) {
    const RelaxSolution sol = solve_restricted(
        pool, static_cast<Scalar>(s), opts.relax, have_warm ? &warm : nullptr);
    const DualCertificate poolcert = dual_certificate(pool, sol);
    const CompletedCertificate full =
        complete_certificate(spec, poolcert, opts.price);
    ++report.rounds;
    report.history.push_back({sol.ldet_value, full.certificate.upper_bound,
                              pool.size(), sol.kw_gap});
    if (full.certificate.upper_bound < report.bound) {
      report.bound = full.certificate.upper_bound;
      report.relax_value = sol.ldet_value;
      report.certificate = full.certificate;
    }
    report.kw_gap_final = sol.kw_gap;
    report.pool_size_final = pool.size();

    const bool violated =
        full.pricing.best_value > poolcert.tau * (1 + opts.violation_tol);
    if (!violated) {
      report.converged = true;
      break;
    }
    if (additions >= opts.max_rounds) break;

    const std::vector<FactorPoint> old_points = pool.points();
    bool grew = false;
    for (const Candidate& cand : full.pricing.top)
      grew = pool.add_point(cand.point) || grew;
    if (!grew) break;
    ++additions;
    if (opts.drop_rows) {
      std::vector<Index> dead;
      for (Index i = seeded; i < static_cast<Index>(old_points.size()); ++i)
        if (sol.weights[i] < opts.drop_tol) dead.push_back(i);
      pool.remove_positions(dead);
    }
    std::map<FactorPoint, Scalar, IndexOrder> carried;
    for (std::size_t i = 0; i < old_points.size(); ++i)
      carried.emplace(old_points[i], sol.weights[static_cast<Index>(i)]);
    warm = Vector::Zero(pool.size());
    for (Index i = 0; i < pool.size(); ++i) {
      const auto it = carried.find(pool.points()[static_cast<std::size_t>(i)]);
      if (it != carried.end()) warm[i] = it->second;
    }
    have_warm = true;
  }
  report.pool_size_final = pool.size();
  return report;
}

}  // namespace dopt
