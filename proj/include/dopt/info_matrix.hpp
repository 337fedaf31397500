#pragma once

#include <cmath>
#include <optional>

#include "dopt/types.hpp"

namespace dopt {

// Rank-one Cholesky kernels. L is lower triangular; v is consumed as scratch.

// L L^T + v v^T -> L' L'^T in place, O(m^2).
template <typename T>
void cholesky_rank_one_update(MatrixX<T>& L, VectorX<T>& v) {
  const Index m = L.rows();
  for (Index k = 0; k < m; ++k) {
    const T lkk = L(k, k);
    const T r = std::hypot(lkk, v[k]);
    const T c = r / lkk;
    const T s = v[k] / lkk;
    L(k, k) = r;
    if (k + 1 < m) {
      auto col = L.col(k).segment(k + 1, m - k - 1);
      auto tail = v.segment(k + 1, m - k - 1);
      col = (col + s * tail) / c;
      tail = c * tail - s * col;
    }
  }
}

// L L^T - v v^T -> L' L'^T in place via hyperbolic rotations. Returns false
// (leaving L in an unspecified state) when a pivot falls below eps.
template <typename T>
bool cholesky_rank_one_downdate(MatrixX<T>& L, VectorX<T>& v, T eps) {
  const Index m = L.rows();
  for (Index k = 0; k < m; ++k) {
    const T lkk = L(k, k);
    const T r2 = (lkk - v[k]) * (lkk + v[k]);
    if (r2 <= eps * eps) return false;
    const T r = std::sqrt(r2);
    const T c = r / lkk;
    const T s = v[k] / lkk;
    L(k, k) = r;
    if (k + 1 < m) {
      auto col = L.col(k).segment(k + 1, m - k - 1);
      auto tail = v.segment(k + 1, m - k - 1);
      col = (col - s * tail) / c;
      tail = c * tail - s * col;
    }
  }
  return true;
}

/// Information matrix B = sum_k w_k v_k v_k^T held as its lower Cholesky
/// factor with a cached log-determinant. Values are persistent: update and
/// downdate return fresh matrices, so one base B can be shared by concurrent
/// exchange scans.
template <typename T>
class InfoMatrixT {
 public:
  using MatrixType = MatrixX<T>;
  using VectorType = VectorX<T>;

  /// Builds B = rows^T Diag(weights) rows. Throws RankDeficientError when the
  /// result is not numerically positive definite.
  static InfoMatrixT build(const MatrixType& rows, const VectorType& weights) {
    MatrixType B = rows.transpose() * weights.asDiagonal() * rows;
    B = ((B + B.transpose()) / T(2)).eval();
    Eigen::LLT<MatrixType> llt(B);
    if (llt.info() != Eigen::Success ||
        (llt.matrixLLT().diagonal().array() <= kEpsPsd).any())
      throw RankDeficientError("rank-deficient design: information matrix is singular");
    InfoMatrixT out;
    out.factor_ = llt.matrixL();
    out.refresh_ldet();
    return out;
  }

  Index dim() const { return factor_.rows(); }
  T ldet() const { return ldet_; }
  const MatrixType& factor() const { return factor_; }

  /// v^T B^{-1} v, always >= 0.
  T quad_form(const VectorType& v) const {
    return factor_.template triangularView<Eigen::Lower>().solve(v).squaredNorm();
  }

  /// B^{-1} v.
  VectorType solve(VectorType v) const {
    factor_.template triangularView<Eigen::Lower>().solveInPlace(v);
    factor_.transpose().template triangularView<Eigen::Upper>().solveInPlace(v);
    return v;
  }

  /// Explicit symmetric inverse, used as the dual matrix Theta.
  MatrixType inverse() const {
    MatrixType X = MatrixType::Identity(dim(), dim());
    factor_.template triangularView<Eigen::Lower>().solveInPlace(X);
    MatrixType inv = X.transpose() * X;
    return ((inv + inv.transpose()) / T(2)).eval();
  }

  /// B + v v^T. New ldet = old ldet + log(1 + v^T B^{-1} v).
  InfoMatrixT updated(const VectorType& v) const {
    InfoMatrixT out(*this);
    VectorType w = v;
    cholesky_rank_one_update(out.factor_, w);
    out.refresh_ldet();
    return out;
  }

  /// B - v v^T, or nullopt when the result would not stay positive definite
  /// (1 - v^T B^{-1} v <= eps_psd); callers treat that as "removal not
  /// admissible" and skip the move.
  std::optional<InfoMatrixT> downdated(const VectorType& v) const {
    if (T(1) - quad_form(v) <= kEpsPsd) return std::nullopt;
    InfoMatrixT out(*this);
    VectorType w = v;
    if (!cholesky_rank_one_downdate(out.factor_, w, T(kEpsPsd))) return std::nullopt;
    out.refresh_ldet();
    return out;
  }

  /// c * B for c > 0.
  InfoMatrixT scaled(T c) const {
    InfoMatrixT out(*this);
    out.factor_ *= std::sqrt(c);
    out.ldet_ = ldet_ + static_cast<T>(dim()) * std::log(c);
    return out;
  }

  /// L L^T, for direct comparison in tests.
  MatrixType reconstruct() const { return factor_ * factor_.transpose(); }

 private:
  InfoMatrixT() = default;

  void refresh_ldet() { ldet_ = T(2) * factor_.diagonal().array().log().sum(); }

  MatrixType factor_;  // lower triangular
  T ldet_ = T(0);
};

using InfoMatrix = InfoMatrixT<Scalar>;

// Convenience for integer designs.
inline InfoMatrix build_info(const Matrix& rows, const Vector& mults) {
  return InfoMatrix::build(rows, mults);
}

// d_i = rows_i B^{-1} rows_i^T for every row at once (one triangular solve).
inline Vector quad_forms(const InfoMatrix& info, const Matrix& rows) {
  Matrix Y = rows.transpose();
  info.factor().triangularView<Eigen::Lower>().solveInPlace(Y);
  return Y.colwise().squaredNorm().transpose();
}

}  // namespace dopt
