#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "dopt/local_search.hpp"
#include "dopt/reference.hpp"
#include "test_util.hpp"

using namespace dopt;

TEST_CASE("dense pricing hand cases") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const Matrix zero = Matrix::Zero(spec.row_dim, spec.row_dim);
  const PricingResult r0 = brute_force_price(spec, zero);
  CHECK(r0.best_value == 0.0);
  CHECK(r0.best_point == FactorPoint{0, 0});

  Matrix e11 = Matrix::Zero(spec.row_dim, spec.row_dim);
  e11(0, 0) = 1.0;
  const PricingResult r1 = brute_force_price(spec, e11);
  CHECK(r1.best_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r1.best_point == FactorPoint{0, 0});
  CHECK(r1.evaluated == 9);
}

TEST_CASE("exhaustive optimum on the two-point line") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 1, 2);
  const BruteForceResult r = brute_force_optimum(spec, 2);
  REQUIRE(r.found);
  CHECK(r.ldet == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(r.design.support.size() == 2);
  CHECK(r.design.support.at({0}) == 1);
  CHECK(r.design.support.at({1}) == 1);
}

TEST_CASE("exhaustive optimum prefers spread levels") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 1, 3);
  const BruteForceResult r = brute_force_optimum(spec, 2);
  REQUIRE(r.found);
  CHECK(r.ldet == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(r.design.support.at({0}) == 1);
  CHECK(r.design.support.at({2}) == 1);
}

TEST_CASE("ties resolve to the lexicographically first multiset") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 2);
  const BruteForceResult r = brute_force_optimum(spec, 3);
  REQUIRE(r.found);
  CHECK(r.ldet == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(r.design.support.size() == 3);
  CHECK(r.design.support.count({0, 0}) == 1);
  CHECK(r.design.support.count({1, 0}) == 1);
  CHECK(r.design.support.count({0, 1}) == 1);
}

TEST_CASE("budgets below the row dimension find nothing") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 2);
  const BruteForceResult r = brute_force_optimum(spec, 2);
  CHECK_FALSE(r.found);
}

TEST_CASE("dense relaxation hand case") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 1, 2);
  const RelaxSolution sol = dense_relaxation(spec, 2);
  CHECK(sol.converged);
  CHECK(sol.weights.size() == 2);
  CHECK(sol.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.weights[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.ldet_value == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::abs(sol.weights.sum() - 2.0) < 1e-9);
  CHECK(sol.kw_gap <= 1e-8);
}

TEST_CASE("reference capacity guards") {
  const ModelSpec wide = make_model_spec(ModelKind::linear, 17, 2);
  CHECK_THROWS_AS(brute_force_price(wide, Matrix::Identity(18, 18)),
                  CapacityError);

  const ModelSpec cube = make_model_spec(ModelKind::quadratic, 3, 3);
  CHECK_THROWS_AS(brute_force_optimum(cube, 12), CapacityError);

  const ModelSpec dense = make_model_spec(ModelKind::linear, 14, 2);
  CHECK_THROWS_AS(dense_relaxation(dense, 20), CapacityError);
}

TEST_CASE("exchange verifier flags improvable designs") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 2);
  Design weak;
  weak.budget = 4;
  weak.add_unit({0, 0});
  weak.add_unit({0, 0});
  weak.add_unit({1, 0});
  weak.add_unit({0, 1});
  const ExchangeCheck check = verify_local_optimum(spec, weak);
  CHECK_FALSE(check.locally_optimal);
  CHECK(check.best_delta > 0);

  Design moved = weak;
  moved.remove_unit(check.leave);
  moved.add_unit(check.enter);
  const Scalar gain =
      dopt_test::fresh_ldet(spec, moved) - dopt_test::fresh_ldet(spec, weak);
  CHECK(gain == doctest::Approx(check.best_delta).epsilon(1e-9));

  const SearchResult polished = local_search_from(spec, weak, {});
  CHECK(verify_local_optimum(spec, polished.design).locally_optimal);
}

TEST_CASE("reference paths are deterministic") {
  std::mt19937_64 rng(51);
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const Matrix q = dopt_test::random_psd(spec.row_dim, rng);
  const PricingResult a = brute_force_price(spec, q, 4);
  const PricingResult b = brute_force_price(spec, q, 4);
  CHECK(a.best_value == b.best_value);
  CHECK(a.best_point == b.best_point);
  REQUIRE(a.top.size() == b.top.size());
  for (std::size_t i = 0; i < a.top.size(); ++i) {
    CHECK(a.top[i].point == b.top[i].point);
  }
  const RelaxSolution r1 = dense_relaxation(spec, 9);
  const RelaxSolution r2 = dense_relaxation(spec, 9);
  CHECK(r1.ldet_value == r2.ldet_value);  // bitwise
}
