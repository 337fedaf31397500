#include "dopt/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace dopt {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Eigenvalue ldet of the symmetrized matrix; nullopt when it is numerically
// rank deficient. Rank-deficient sums of outer products carry eigenvalues at
// roundoff scale, so the cutoff is relative to the largest eigenvalue. Fresh
// factorization, no shared kernels.
std::optional<Scalar> plain_ldet(const Matrix& B) {
  Eigen::SelfAdjointEigenSolver<Matrix> es((B + B.transpose()) / 2,
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Vector ev = es.eigenvalues();
  const Scalar largest = ev.maxCoeff();
  if (largest <= 0 || ev.minCoeff() <= 1e-12 * largest) return std::nullopt;
  return ev.array().log().sum();
}

std::optional<std::uint64_t> multiset_count(std::uint64_t n, std::uint64_t s,
                                            std::uint64_t cap) {
  // C(n + s - 1, s); the value is monotone in k, so bail as soon as it
  // passes the cap and the intermediate product stays far from overflow.
  std::uint64_t result = 1;
  for (std::uint64_t k = 1; k <= s; ++k) {
    result = result * (n - 1 + k) / k;  // exact at every step
    if (result > cap) return std::nullopt;
  }
  return result;
}

}  // namespace

PricingResult brute_force_price(const ModelSpec& spec, const Matrix& Q,
                                int top_k) {
  if (Q.rows() != spec.row_dim || Q.cols() != spec.row_dim)
    throw std::invalid_argument("pricing kernel dimension does not match model");
  const Matrix A = materialize_dense(spec, 100'000);
  const Index n = A.rows();
  std::vector<Candidate> top;
  for (Index i = 0; i < n; ++i) {
    const Vector v = A.row(i).transpose();
    const Scalar val = v.dot(Q * v);
    const FactorPoint point = decode_point(spec, static_cast<std::uint64_t>(i));
    const auto better = [&](const Candidate& c) {
      if (val != c.value) return val > c.value;
      return index_less(point, c.point);
    };
    if (static_cast<int>(top.size()) == top_k && !better(top.back())) continue;
    auto it = top.begin();
    while (it != top.end() && !better(*it)) ++it;
    top.insert(it, Candidate{point, val});
    if (static_cast<int>(top.size()) > top_k) top.pop_back();
  }
  PricingResult out;
  out.best_point = top.front().point;
  out.best_value = top.front().value;
  out.evaluated = static_cast<std::uint64_t>(n);
  out.top = std::move(top);
  return out;
}

BruteForceResult brute_force_optimum(const ModelSpec& spec, std::int64_t s) {
  if (!spec.row_count)
    throw CapacityError("brute force needs an explicit row count");
  const std::uint64_t n = *spec.row_count;
  const auto count =
      multiset_count(n, static_cast<std::uint64_t>(s), 10'000'000);
  if (!count)
    throw CapacityError("brute force capacity exceeded: too many multisets");
  const Matrix A = materialize_dense(spec, 100'000);
  const int m = spec.row_dim;

  BruteForceResult best;
  best.ldet = -kInf;
  std::vector<Index> pick(static_cast<std::size_t>(s), 0);
  for (;;) {
    Matrix B = Matrix::Zero(m, m);
    for (const Index row : pick)
      B.noalias() += A.row(row).transpose() * A.row(row);
    if (const auto ld = plain_ldet(B)) {
      // Multisets are enumerated in lexicographic order, so keeping the
      // incumbent on roundoff-level ties resolves ties to the first one.
      const Scalar margin = 1e-12 * std::max<Scalar>(1, std::abs(*ld));
      if (*ld > best.ldet + margin) {
        best.ldet = *ld;
        best.found = true;
        best.design.support.clear();
        best.design.budget = s;
        for (const Index row : pick)
          best.design.add_unit(
              decode_point(spec, static_cast<std::uint64_t>(row)));
      }
    }
    // next nondecreasing index sequence
    std::size_t pos = pick.size();
    while (pos > 0 && pick[pos - 1] == static_cast<Index>(n) - 1) --pos;
    if (pos == 0) break;
    const Index next = pick[pos - 1] + 1;
    for (std::size_t k = pos - 1; k < pick.size(); ++k) pick[k] = next;
  }
  return best;
}

RelaxSolution dense_relaxation(const ModelSpec& spec, std::int64_t s) {
  if (!spec.row_count || *spec.row_count > 10'000)
    throw CapacityError("dense relaxation needs n <= 10^4");
  const Matrix A = materialize_dense(spec, 10'000);
  const Index n = A.rows();
  const auto m = static_cast<Scalar>(spec.row_dim);
  const auto sreal = static_cast<Scalar>(s);
  const Scalar target = m / sreal;
  constexpr Scalar eps = 1e-8;
  constexpr std::int64_t cap = 1'000'000;

  Vector x = Vector::Constant(n, sreal / static_cast<Scalar>(n));
  const auto gradient = [&](const Vector& w) {
    Matrix B = A.transpose() * w.asDiagonal() * A;
    B = ((B + B.transpose()) / 2).eval();
    Eigen::LLT<Matrix> llt(B);
    if (llt.info() != Eigen::Success)
      throw RankDeficientError("dense relaxation hit a singular matrix");
    Matrix Y = A.transpose();
    llt.matrixL().solveInPlace(Y);
    return Vector(Y.colwise().squaredNorm().transpose());
  };

  RelaxSolution out;
  out.budget = sreal;
  std::int64_t it = 0;
  for (; it < cap; ++it) {
    const Vector d = gradient(x);
    Index imax = 0;
    const Scalar dmax = d.maxCoeff(&imax);
    if (dmax - target <= eps * target) {
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
    const Scalar gain_toward = sreal * dmax - m;
    const Scalar gain_away = jmin >= 0 && x[jmin] < sreal ? m - sreal * dmin : -kInf;
    if (gain_toward >= gain_away) {
      const Scalar sigma = sreal * dmax;
      const Scalar t = (sigma - m) / (m * (sigma - 1));
      x *= 1 - t;
      x[imax] += t * sreal;
    } else {
      const Scalar sigma = sreal * dmin;
      const Scalar t_max = x[jmin] / (sreal - x[jmin]);
      Scalar t = sigma > 1 ? (m - sigma) / (m * (sigma - 1)) : kInf;
      const bool drop = t >= t_max;
      if (drop) t = t_max;
      x *= 1 + t;
      x[jmin] = drop ? 0 : x[jmin] - t * sreal;
    }
    if ((it + 1) % 256 == 0) x *= sreal / x.sum();
  }
  x *= sreal / x.sum();
  const Vector d = gradient(x);
  Matrix B = A.transpose() * x.asDiagonal() * A;
  B = ((B + B.transpose()) / 2).eval();
  const auto ld = plain_ldet(B);
  out.weights = std::move(x);
  out.ldet_value = ld ? *ld : -kInf;
  out.iterations = it;
  out.kw_gap = d.maxCoeff() - target;
  return out;
}

ExchangeCheck verify_local_optimum(const ModelSpec& spec, const Design& design,
                                   Scalar eps_imp) {
  if (!spec.row_count || *spec.row_count > 10'000)
    throw CapacityError("exchange verification needs n <= 10^4");
  const Matrix A = materialize_dense(spec, 10'000);
  const Index n = A.rows();

  Matrix B = Matrix::Zero(spec.row_dim, spec.row_dim);
  for (const auto& [point, mult] : design.support) {
    const Vector v = expand_row(spec, point);
    B.noalias() += static_cast<Scalar>(mult) * v * v.transpose();
  }
  const auto base = plain_ldet(B);
  if (!base) throw RankDeficientError("design information matrix is singular");

  ExchangeCheck out;
  const Scalar threshold = eps_imp * std::max<Scalar>(1, std::abs(*base));
  for (const auto& [leave, mult] : design.support) {
    const Vector vj = expand_row(spec, leave);
    const Matrix M = B - vj * vj.transpose();
    const auto removed = plain_ldet(M);
    if (!removed) continue;
    Eigen::LLT<Matrix> llt((M + M.transpose()) / 2);
    for (Index i = 0; i < n; ++i) {
      const FactorPoint enter = decode_point(spec, static_cast<std::uint64_t>(i));
      if (enter == leave) continue;
      const Vector vi = A.row(i).transpose();
      const Scalar q = llt.matrixL().solve(vi).squaredNorm();
      const Scalar delta = std::log1p(q) - (*base - *removed);
      if (delta > out.best_delta) {
        out.best_delta = delta;
        out.leave = leave;
        out.enter = enter;
      }
    }
  }
  out.locally_optimal = out.best_delta <= threshold;
  return out;
}

}  // namespace dopt
