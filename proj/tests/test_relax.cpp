#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "dopt/local_search.hpp"
#include "dopt/reference.hpp"
#include "dopt/relaxation.hpp"
#include "test_util.hpp"

using namespace dopt;

namespace {

RowPool full_pool(const ModelSpec& spec) {
  std::vector<FactorPoint> points;
  for (std::uint64_t i = 0; i < *spec.row_count; ++i) {
    points.push_back(decode_point(spec, i));
  }
  return RowPool(spec, points);
}

}  // namespace

TEST_CASE("row pool bookkeeping") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 3);
  RowPool pool(spec, {{0, 0}, {2, 1}});
  CHECK(pool.size() == 2);
  CHECK(pool.contains({2, 1}));
  CHECK_FALSE(pool.add_point({0, 0}));
  CHECK(pool.add_point({1, 1}));
  CHECK(pool.size() == 3);
  for (Index i = 0; i < pool.size(); ++i) {
    const Vector v = expand_row(spec, pool.points()[i]);
    CHECK((pool.rows().row(i).transpose() - v).cwiseAbs().maxCoeff() == 0.0);
  }
  pool.remove_positions({1});
  CHECK(pool.size() == 2);
  CHECK(pool.points()[0] == FactorPoint{0, 0});
  CHECK(pool.points()[1] == FactorPoint{1, 1});
  CHECK_FALSE(pool.contains({2, 1}));
  CHECK_THROWS_AS(pool.add_point({3, 0}), std::invalid_argument);
}

TEST_CASE("hand-checked two-point relaxation") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 1, 2);
  RowPool pool(spec, {{0}, {1}});
  const RelaxSolution sol = solve_restricted(pool, 2.0);
  CHECK(sol.converged);
  CHECK(sol.weights[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.weights[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.ldet_value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.kw_gap <= 1e-6);

  const DualCertificate cert = dual_certificate(pool, sol);
  CHECK(cert.scope == CertScope::pool);
  CHECK(cert.tau == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(cert.upper_bound == doctest::Approx(0.0).epsilon(1e-8));
  Matrix theta_expected(2, 2);
  theta_expected << 1, -1, -1, 2;
  CHECK((cert.theta - theta_expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rank-deficient pools are rejected") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 2);
  RowPool pool(spec, {{0, 0}, {1, 0}});
  CHECK_THROWS_AS(solve_restricted(pool, 4.0), RankDeficientError);
}

TEST_CASE("relaxation keeps the budget and converges on random pools") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
    const RowPool pool = full_pool(spec);
    const Scalar s = 7 + trial;
    RelaxOptions opts;
    opts.eps_kw = 1e-7;
    const RelaxSolution sol = solve_restricted(pool, s, opts);
    CHECK(sol.converged);
    CHECK(sol.weights.minCoeff() >= 0);
    CHECK(std::abs(sol.weights.sum() - s) < 1e-9 * s);
    CHECK(sol.kw_gap <=
          1e-7 * (static_cast<Scalar>(spec.row_dim) / s) + 1e-12);
    const InfoMatrix b = build_info(pool.rows(), sol.weights);
    CHECK(std::abs(sol.ldet_value - b.ldet()) < 1e-9);

    // No random feasible point beats the reported optimum.
    std::uniform_real_distribution<Scalar> unif(0.01, 1.0);
    for (int probe = 0; probe < 20; ++probe) {
      Vector y(pool.size());
      for (Index i = 0; i < y.size(); ++i) y[i] = unif(rng);
      y *= s / y.sum();
      try {
        CHECK(build_info(pool.rows(), y).ldet() <= sol.ldet_value + 1e-6);
      } catch (const RankDeficientError&) {
      }
    }
  }
}

TEST_CASE("warm starts resume near the optimum") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  const RowPool pool = full_pool(spec);
  RelaxOptions opts;
  opts.eps_kw = 1e-8;
  const RelaxSolution cold = solve_restricted(pool, 12.0, opts);
  REQUIRE(cold.converged);
  const RelaxSolution warm = solve_restricted(pool, 12.0, opts, &cold.weights);
  CHECK(warm.converged);
  CHECK(warm.iterations <= 2);
  CHECK(std::abs(warm.ldet_value - cold.ldet_value) < 1e-8);
}

TEST_CASE("iteration cap reports non-convergence") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  const RowPool pool = full_pool(spec);
  RelaxOptions opts;
  opts.max_iterations = 1;
  opts.eps_kw = 1e-12;
  const RelaxSolution sol = solve_restricted(pool, 12.0, opts);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 1);
  CHECK(std::abs(sol.weights.sum() - 12.0) < 1e-9);
}

TEST_CASE("bounded solver respects bounds and matches the free optimum") {
  std::mt19937_64 rng(42);
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const RowPool pool = full_pool(spec);
  const Scalar s = 9;
  RelaxOptions opts;
  opts.eps_kw = 1e-8;

  SUBCASE("loose bounds reduce to the simplex solution") {
    const Vector lower = Vector::Zero(pool.size());
    const Vector upper = Vector::Constant(pool.size(), s);
    const RelaxSolution free = solve_restricted(pool, s, opts);
    const RelaxSolution boxed =
        solve_restricted_bounded(pool, s, lower, upper, opts);
    CHECK(boxed.converged);
    CHECK(std::abs(boxed.ldet_value - free.ldet_value) < 1e-5);
    CHECK((boxed.weights.array() >= -1e-9).all());
    CHECK(std::abs(boxed.weights.sum() - s) < 1e-8 * s);
  }

  SUBCASE("tight bounds bite") {
    Vector lower = Vector::Zero(pool.size());
    Vector upper = Vector::Constant(pool.size(), s);
    lower[4] = 3.0;  // force weight onto one row
    upper[0] = 0.0;  // and forbid another
    const RelaxSolution boxed =
        solve_restricted_bounded(pool, s, lower, upper, opts);
    CHECK(boxed.weights[4] >= 3.0 - 1e-9);
    CHECK(boxed.weights[0] <= 1e-9);
    CHECK(std::abs(boxed.weights.sum() - s) < 1e-8 * s);
    const RelaxSolution free = solve_restricted(pool, s, opts);
    CHECK(boxed.ldet_value <= free.ldet_value + 1e-8);
  }

  SUBCASE("fully pinned weights are returned as-is") {
    std::uniform_real_distribution<Scalar> unif(0.1, 1.0);
    Vector pin(pool.size());
    for (Index i = 0; i < pin.size(); ++i) pin[i] = unif(rng);
    pin *= s / pin.sum();
    const RelaxSolution fixed =
        solve_restricted_bounded(pool, s, pin, pin, opts);
    CHECK(fixed.converged);
    CHECK((fixed.weights - pin).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(fixed.ldet_value - build_info(pool.rows(), pin).ldet()) <
          1e-9);
  }

  SUBCASE("contradictory bounds are infeasible") {
    const Vector lower = Vector::Constant(pool.size(), 2.0);
    const Vector upper = Vector::Constant(pool.size(), 3.0);
    CHECK_THROWS_AS(solve_restricted_bounded(pool, s, lower, upper, opts),
                    InfeasibleError);
  }
}

TEST_CASE("certificates satisfy their defining identity") {
  std::mt19937_64 rng(43);
  const ModelSpec spec = make_model_spec(ModelKind::linear, 4, 2);
  const RowPool pool = full_pool(spec);
  const RelaxSolution sol = solve_restricted(pool, 8.0);
  const DualCertificate cert = dual_certificate(pool, sol);
  const Scalar m = spec.row_dim;
  CHECK(std::abs(cert.upper_bound - (cert.base_ldet + cert.tau * cert.s - m)) <
        1e-9 * std::max<Scalar>(1, std::abs(cert.upper_bound)));
  // tau really is the pool maximum of the quadratic form.
  Scalar tau = 0;
  for (Index i = 0; i < pool.size(); ++i) {
    const Vector v = pool.rows().row(i).transpose();
    tau = std::max(tau, v.dot(cert.theta * v));
  }
  CHECK(cert.tau == doctest::Approx(tau).epsilon(1e-10));
}

TEST_CASE("completion lifts a pool certificate to the full grid") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  // Deliberately poor pool: misses most of the grid.
  RowPool pool(spec, {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {0, 2}, {2, 2}});
  const RelaxSolution sol = solve_restricted(pool, 8.0);
  const DualCertificate partial = dual_certificate(pool, sol);
  const CompletedCertificate done = complete_certificate(spec, partial);
  CHECK(done.certificate.scope == CertScope::full);
  CHECK(done.certificate.tau >= partial.tau - 1e-12);
  CHECK(done.certificate.upper_bound >= partial.upper_bound - 1e-9);
  // Full-scope tau covers every row of the grid.
  const Matrix all = materialize_dense(spec);
  for (Index i = 0; i < all.rows(); ++i) {
    const Vector v = all.row(i).transpose();
    CHECK(v.dot(done.certificate.theta * v) <= done.certificate.tau + 1e-8);
  }
}

TEST_CASE("row generation matches the dense relaxation") {
  struct Case {
    ModelKind kind;
    int factors;
    int levels;
    std::int64_t s;
  };
  const Case cases[] = {
      {ModelKind::linear, 3, 2, 6},
      {ModelKind::linear, 5, 2, 9},
      {ModelKind::linear, 3, 3, 7},
      {ModelKind::quadratic, 2, 3, 8},
      {ModelKind::quadratic, 3, 3, 12},
  };
  for (const auto& c : cases) {
    const ModelSpec spec = make_model_spec(c.kind, c.factors, c.levels);
    RowGenOptions opts;
    opts.relax.eps_kw = 1e-8;
    const BoundReport report = natural_bound_rowgen(spec, c.s, opts);
    CHECK(report.converged);
    CHECK(report.kw_gap_final <= 1e-6);
    CHECK(report.certificate.scope == CertScope::full);

    const RelaxSolution dense = dense_relaxation(spec, c.s);
    CHECK(std::abs(report.bound - dense.ldet_value) <=
          1e-5 * std::max<Scalar>(1, std::abs(dense.ldet_value)));
    CHECK(report.bound >= dense.ldet_value - 1e-7);

    // History: pool optimum never degrades, reported bound is the best seen.
    Scalar best = report.history.front().bound;
    for (std::size_t r = 1; r < report.history.size(); ++r) {
      CHECK(report.history[r].relax_value >=
            report.history[r - 1].relax_value - 1e-6);
      best = std::min(best, report.history[r].bound);
    }
    CHECK(report.bound == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("certificates from row generation are exhaustively feasible") {
  struct Case {
    ModelKind kind;
    int factors;
    int levels;
    std::int64_t s;
  };
  const Case cases[] = {
      {ModelKind::linear, 7, 2, 10},
      {ModelKind::linear, 4, 3, 8},
      {ModelKind::quadratic, 4, 3, 17},
  };
  for (const auto& c : cases) {
    const ModelSpec spec = make_model_spec(c.kind, c.factors, c.levels);
    const BoundReport report = natural_bound_rowgen(spec, c.s);
    const DualCertificate& cert = report.certificate;
    const Matrix all = materialize_dense(spec);
    REQUIRE(all.rows() <= 243);
    for (Index i = 0; i < all.rows(); ++i) {
      const Vector v = all.row(i).transpose();
      CHECK(v.dot(cert.theta * v) <= cert.tau + 1e-8);
    }
    const Scalar m = spec.row_dim;
    CHECK(std::abs(cert.upper_bound - (cert.base_ldet + cert.tau * cert.s - m)) <=
          1e-9 * std::max<Scalar>(1, std::abs(cert.upper_bound)));
  }
}

TEST_CASE("zero growth rounds still give a full-scope bound") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  RowGenOptions opts;
  opts.max_rounds = 0;
  const BoundReport report = natural_bound_rowgen(spec, 8, opts);
  CHECK(report.rounds == 1);
  CHECK(report.certificate.scope == CertScope::full);
  CHECK(report.pool_size_final ==
        static_cast<Index>(initial_design(spec, 8).support.size()));
  const RelaxSolution dense = dense_relaxation(spec, 8);
  CHECK(report.bound >= dense.ldet_value - 1e-7);
}

TEST_CASE("row generation is deterministic and thread-invariant") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  RowGenOptions one;
  one.price.threads = 1;
  RowGenOptions three;
  three.price.threads = 3;
  const BoundReport a = natural_bound_rowgen(spec, 15, one);
  const BoundReport b = natural_bound_rowgen(spec, 15, three);
  const BoundReport c = natural_bound_rowgen(spec, 15, one);
  CHECK(a.bound == b.bound);  // bitwise
  CHECK(a.bound == c.bound);
  CHECK(a.pool_size_final == b.pool_size_final);
  CHECK(a.rounds == b.rounds);
}
