#include "dopt/model.hpp"

#include <limits>
#include <sstream>

namespace dopt {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::linear ? "linear" : "quadratic";
}

std::optional<ModelKind> model_kind_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "quadratic") return ModelKind::quadratic;
  return std::nullopt;
}

namespace {

std::optional<std::uint64_t> checked_pow(std::uint64_t base, int exp) {
  std::uint64_t out = 1;
  for (int i = 0; i < exp; ++i) {
    if (out > std::numeric_limits<std::uint64_t>::max() / base) return std::nullopt;
    out *= base;
  }
  return out;
}

}  // namespace

ModelSpec make_model_spec(ModelKind kind, int factors, int levels) {
  if (factors < 1) throw std::invalid_argument("factors must be >= 1");
  if (levels < 2) throw std::invalid_argument("levels must be >= 2");
  ModelSpec spec;
  spec.kind = kind;
  spec.factors = factors;
  spec.levels = levels;
  spec.row_dim = kind == ModelKind::linear
                     ? 1 + factors
                     : 1 + 2 * factors + factors * (factors - 1) / 2;
  spec.row_count = checked_pow(static_cast<std::uint64_t>(levels), factors);
  if (kind == ModelKind::linear && levels != 2) {
    std::ostringstream note;
    note << "linear response-surface models are usually run with 2 levels; got "
         << levels;
    spec.note = note.str();
  }
  return spec;
}

bool point_in_range(const ModelSpec& spec, const FactorPoint& point) {
  if (static_cast<int>(point.size()) != spec.factors) return false;
  for (Level a : point) {
    if (a < 0 || a >= spec.levels) return false;
  }
  return true;
}

std::uint64_t encode_point(const ModelSpec& spec, const FactorPoint& point) {
  if (!point_in_range(spec, point))
    throw std::invalid_argument("factor point out of range for model");
  if (spec.astronomical())
    throw CapacityError("astronomical index: L^F exceeds 64-bit range");
  std::uint64_t index = 0;
  std::uint64_t scale = 1;
  for (int k = 0; k < spec.factors; ++k) {
    index += static_cast<std::uint64_t>(point[k]) * scale;
    scale *= static_cast<std::uint64_t>(spec.levels);
  }
  return index;
}

FactorPoint decode_point(const ModelSpec& spec, std::uint64_t index) {
  if (spec.row_count && index >= *spec.row_count)
    throw std::out_of_range("row index out of range");
  FactorPoint point(spec.factors, 0);
  const auto L = static_cast<std::uint64_t>(spec.levels);
  for (int k = 0; k < spec.factors; ++k) {
    point[k] = static_cast<Level>(index % L);
    index /= L;
  }
  if (index != 0) throw std::out_of_range("row index out of range");
  return point;
}

bool index_less(const FactorPoint& a, const FactorPoint& b) {
  // Little-endian digits: the last factor is the most significant.
  for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) {
    if (a[k] != b[k]) return a[k] < b[k];
  }
  return false;
}

Vector expand_row(const ModelSpec& spec, const FactorPoint& point) {
  if (!point_in_range(spec, point))
    throw std::invalid_argument("factor point out of range for model");
  const int F = spec.factors;
  Vector v(spec.row_dim);
  v[0] = 1.0;
  for (int k = 0; k < F; ++k) v[1 + k] = static_cast<Scalar>(point[k]);
  if (spec.kind == ModelKind::quadratic) {
    for (int k = 0; k < F; ++k) v[1 + F + k] = v[1 + k] * v[1 + k];
    int pos = 1 + 2 * F;
    for (int i = 0; i < F; ++i)
      for (int j = i + 1; j < F; ++j) v[pos++] = v[1 + i] * v[1 + j];
  }
  return v;
}

int cross_term_index(const ModelSpec& spec, int i, int j) {
  const int F = spec.factors;
  // Offset of pair (i,j), i<j, in lexicographic order.
  return 1 + 2 * F + i * (2 * F - i - 1) / 2 + (j - i - 1);
}

Matrix materialize_dense(const ModelSpec& spec, std::uint64_t cap) {
  if (spec.astronomical() || *spec.row_count > cap)
    throw CapacityError("instance too large to materialize");
  const auto n = static_cast<Index>(*spec.row_count);
  Matrix A(n, spec.row_dim);
  for (Index ell = 0; ell < n; ++ell)
    A.row(ell) = expand_row(spec, decode_point(spec, static_cast<std::uint64_t>(ell)));
  return A;
}

std::int64_t Design::total_multiplicity() const {
  std::int64_t total = 0;
  for (const auto& [point, mult] : support) total += mult;
  return total;
}

void Design::add_unit(const FactorPoint& point) { ++support[point]; }

void Design::remove_unit(const FactorPoint& point) {
  auto it = support.find(point);
  if (it == support.end())
    throw std::invalid_argument("cannot remove a unit from an absent point");
  if (--it->second == 0) support.erase(it);
}

DesignRows design_rows(const ModelSpec& spec, const Design& design) {
  DesignRows out;
  out.points.reserve(design.support.size());
  out.rows.resize(static_cast<Index>(design.support.size()), spec.row_dim);
  out.mults.resize(static_cast<Index>(design.support.size()));
  Index i = 0;
  for (const auto& [point, mult] : design.support) {
    out.points.push_back(point);
    out.rows.row(i) = expand_row(spec, point);
    out.mults[i] = static_cast<Scalar>(mult);
    ++i;
  }
  return out;
}

}  // namespace dopt
