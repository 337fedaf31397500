#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dopt {

// Dense types, templated on scalar in Eigen fashion; the solver stack is
// instantiated with double throughout.
template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Scalar = double;
using Matrix = MatrixX<Scalar>;
using Vector = VectorX<Scalar>;
using Index = Eigen::Index;

// Pivot threshold below which a factorization counts as singular.
inline constexpr Scalar kEpsPsd = 1e-10;

// Requested work exceeds a hard enumeration/materialization cap.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// No feasible design exists for the requested budget (s < m).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// An information matrix that should be positive definite is not.
class RankDeficientError : public std::runtime_error {
 public:
  explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dopt
