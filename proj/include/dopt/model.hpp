#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dopt/types.hpp"

namespace dopt {

enum class ModelKind { linear, quadratic };

const char* to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(const std::string& name);

// Levels of the F factors of one candidate experiment, each in {0,...,L-1}.
using Level = std::int32_t;
using FactorPoint = std::vector<Level>;

/// A response-surface instance. The design matrix A is implicit: it has one
/// row per point of the L^F factor grid and is never stored.
struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  int factors = 0;  // F
  int levels = 0;   // L
  int row_dim = 0;  // m, derived from kind and F

  // n = L^F. Empty when the count overflows 64 bits; every solver path must
  // keep working in that case.
  std::optional<std::uint64_t> row_count;

  // Advisory note from validation (e.g. linear model with L != 2).
  std::string note;

  bool astronomical() const { return !row_count.has_value(); }
};

ModelSpec make_model_spec(ModelKind kind, int factors, int levels);

bool point_in_range(const ModelSpec& spec, const FactorPoint& point);

// Canonical row order: little-endian base-L over the factor levels, so the
// first factor cycles fastest.
std::uint64_t encode_point(const ModelSpec& spec, const FactorPoint& point);
FactorPoint decode_point(const ModelSpec& spec, std::uint64_t index);

// Compares two points by encoded row index without forming the index, so it
// also works when L^F overflows.
bool index_less(const FactorPoint& a, const FactorPoint& b);

// Strict weak order usable as a map/set comparator.
struct IndexOrder {
  bool operator()(const FactorPoint& a, const FactorPoint& b) const {
    return index_less(a, b);
  }
};

// Expanded model row v for one factor point:
//   linear:    (1; a_1..a_F)
//   quadratic: (1; a_1..a_F; a_1^2..a_F^2; a_i a_j for i<j lexicographic)
Vector expand_row(const ModelSpec& spec, const FactorPoint& point);

// Position of the cross term a_i a_j (i < j) within a quadratic row.
int cross_term_index(const ModelSpec& spec, int i, int j);

inline constexpr std::uint64_t kDefaultMaterializeCap = 1'000'000;

// Full n x m design matrix, for reference checks only. Guarded so that no
// huge instance is ever expanded by accident.
Matrix materialize_dense(const ModelSpec& spec,
                         std::uint64_t cap = kDefaultMaterializeCap);

/// A sparse integer design: multiplicities on the support points, summing to
/// the experiment budget s.
struct Design {
  std::map<FactorPoint, std::int64_t, IndexOrder> support;
  std::int64_t budget = 0;  // s

  std::int64_t total_multiplicity() const;
  void add_unit(const FactorPoint& point);
  // Removes one unit; erases the point when its multiplicity reaches zero.
  void remove_unit(const FactorPoint& point);
  bool valid() const { return total_multiplicity() == budget; }
};

// Support rows stacked in encoded-index order with matching multiplicities.
struct DesignRows {
  std::vector<FactorPoint> points;
  Matrix rows;   // one row per support point
  Vector mults;  // positive multiplicities
};

DesignRows design_rows(const ModelSpec& spec, const Design& design);

}  // namespace dopt
