#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <stdexcept>

#include "doctest.h"
#include "dopt/model.hpp"
#include "test_util.hpp"

using namespace dopt;

TEST_CASE("model kind names round-trip") {
  CHECK(model_kind_from_string("linear") == ModelKind::linear);
  CHECK(model_kind_from_string("quadratic") == ModelKind::quadratic);
  CHECK_FALSE(model_kind_from_string("cubic").has_value());
  CHECK(std::string(to_string(ModelKind::linear)) == "linear");
  CHECK(std::string(to_string(ModelKind::quadratic)) == "quadratic");
}

TEST_CASE("row dimension formulas") {
  for (int f = 1; f <= 12; ++f) {
    CHECK(make_model_spec(ModelKind::linear, f, 2).row_dim == 1 + f);
    CHECK(make_model_spec(ModelKind::quadratic, f, 3).row_dim ==
          1 + 2 * f + f * (f - 1) / 2);
  }
}

TEST_CASE("three-level three-factor quadratic instance shape") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  REQUIRE(spec.row_count.has_value());
  CHECK(*spec.row_count == 27);
  CHECK(spec.row_dim == 10);
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(make_model_spec(ModelKind::linear, 0, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_model_spec(ModelKind::linear, 3, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_model_spec(ModelKind::quadratic, -1, 3),
                  std::invalid_argument);
}

TEST_CASE("row count overflows to astronomical") {
  const ModelSpec big = make_model_spec(ModelKind::linear, 50, 3);
  CHECK(big.astronomical());
  const ModelSpec fits = make_model_spec(ModelKind::linear, 40, 3);
  REQUIRE(fits.row_count.has_value());
  CHECK(*fits.row_count == 12157665459056928801ull);
  const ModelSpec exact = make_model_spec(ModelKind::linear, 64, 2);
  CHECK(exact.astronomical());
  const ModelSpec under = make_model_spec(ModelKind::linear, 63, 2);
  REQUIRE(under.row_count.has_value());
  CHECK(*under.row_count == (1ull << 63));
}

TEST_CASE("linear model with more than two levels carries a note") {
  CHECK(make_model_spec(ModelKind::linear, 2, 2).note.empty());
  CHECK_FALSE(make_model_spec(ModelKind::linear, 2, 5).note.empty());
}

TEST_CASE("encode and decode are inverse bijections") {
  for (const auto& inst : dopt_test::enumerable_instances(4096, 7)) {
    const ModelSpec spec = make_model_spec(inst.kind, inst.factors, inst.levels);
    for (std::uint64_t i = 0; i < *spec.row_count; ++i) {
      const FactorPoint point = decode_point(spec, i);
      CHECK(point_in_range(spec, point));
      CHECK(encode_point(spec, point) == i);
    }
  }
}

TEST_CASE("first factor cycles fastest in the row order") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 3, 3);
  CHECK(decode_point(spec, 0) == FactorPoint{0, 0, 0});
  CHECK(decode_point(spec, 1) == FactorPoint{1, 0, 0});
  CHECK(decode_point(spec, 3) == FactorPoint{0, 1, 0});
  CHECK(decode_point(spec, 9) == FactorPoint{0, 0, 1});
  CHECK(encode_point(spec, {2, 1, 0}) == 5);
}

TEST_CASE("decode rejects out-of-range indices") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 3);
  CHECK_THROWS_AS(decode_point(spec, 9), std::out_of_range);
  CHECK_THROWS_AS(encode_point(spec, {3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(encode_point(spec, {0}), std::invalid_argument);
}

TEST_CASE("index order matches encoded order") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 3, 3);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const FactorPoint a = dopt_test::random_point(spec, rng);
    const FactorPoint b = dopt_test::random_point(spec, rng);
    CHECK(index_less(a, b) == (encode_point(spec, a) < encode_point(spec, b)));
  }
}

TEST_CASE("index order works beyond 64-bit indices") {
  FactorPoint low(50, 0);
  FactorPoint high(50, 0);
  high[49] = 1;
  low[0] = 2;
  CHECK(index_less(low, high));
  CHECK_FALSE(index_less(high, low));
  CHECK_FALSE(index_less(low, low));
}

TEST_CASE("expanded rows follow the documented layout") {
  const ModelSpec lin = make_model_spec(ModelKind::linear, 2, 4);
  const Vector vl = expand_row(lin, {3, 1});
  REQUIRE(vl.size() == 3);
  CHECK(vl[0] == 1.0);
  CHECK(vl[1] == 3.0);
  CHECK(vl[2] == 1.0);

  const ModelSpec quad = make_model_spec(ModelKind::quadratic, 3, 3);
  const Vector vq = expand_row(quad, {1, 2, 0});
  REQUIRE(vq.size() == 10);
  const Vector expected =
      (Vector(10) << 1, 1, 2, 0, 1, 4, 0, 2, 0, 0).finished();
  CHECK((vq - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross term positions are lexicographic") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 4, 3);
  int pos = 1 + 2 * spec.factors;
  for (int i = 0; i < spec.factors; ++i) {
    for (int j = i + 1; j < spec.factors; ++j) {
      CHECK(cross_term_index(spec, i, j) == pos);
      ++pos;
    }
  }
  CHECK(pos == spec.row_dim);
}

TEST_CASE("materialized rows agree with expand_row") {
  const ModelSpec spec = make_model_spec(ModelKind::quadratic, 2, 3);
  const Matrix a = materialize_dense(spec);
  REQUIRE(a.rows() == 9);
  REQUIRE(a.cols() == 6);
  for (Index i = 0; i < a.rows(); ++i) {
    const Vector v = expand_row(spec, decode_point(spec, i));
    CHECK((a.row(i).transpose() - v).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("materialize refuses huge instances") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 20, 2);
  CHECK_THROWS_AS(materialize_dense(spec, 100'000), CapacityError);
  const ModelSpec astro = make_model_spec(ModelKind::linear, 80, 2);
  CHECK_THROWS_AS(materialize_dense(astro), CapacityError);
}

TEST_CASE("design bookkeeping") {
  Design design;
  design.budget = 3;
  design.add_unit({0, 0});
  design.add_unit({1, 0});
  design.add_unit({1, 0});
  CHECK(design.total_multiplicity() == 3);
  CHECK(design.valid());
  CHECK(design.support.size() == 2);
  design.remove_unit({1, 0});
  CHECK(design.support.at({1, 0}) == 1);
  design.remove_unit({1, 0});
  CHECK(design.support.count({1, 0}) == 0);
  CHECK_FALSE(design.valid());
}

TEST_CASE("design rows are sorted by encoded index") {
  const ModelSpec spec = make_model_spec(ModelKind::linear, 2, 3);
  Design design;
  design.budget = 4;
  design.add_unit({2, 2});
  design.add_unit({0, 1});
  design.add_unit({0, 1});
  design.add_unit({1, 0});
  const DesignRows rows = design_rows(spec, design);
  REQUIRE(rows.points.size() == 3);
  CHECK(rows.points[0] == FactorPoint{1, 0});
  CHECK(rows.points[1] == FactorPoint{0, 1});
  CHECK(rows.points[2] == FactorPoint{2, 2});
  CHECK(rows.mults[1] == 2.0);
  CHECK(rows.rows.rows() == 3);
  for (std::size_t i = 0; i < rows.points.size(); ++i) {
    const Vector v = expand_row(spec, rows.points[i]);
    CHECK((rows.rows.row(i).transpose() - v).cwiseAbs().maxCoeff() == 0.0);
  }
}
