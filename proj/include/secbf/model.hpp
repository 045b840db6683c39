#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "secbf/errors.hpp"
#include "secbf/numeric_config.hpp"

namespace secbf {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Discrete-time plant x+ = A x + B u, y = C x (one output row per sensor).
template <typename Scalar = double>
class LtiSystem {
 public:
  LtiSystem() = default;
  LtiSystem(Matrix<Scalar> A, Matrix<Scalar> B, Matrix<Scalar> C)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)) {
    if (A_.rows() < 1 || A_.rows() != A_.cols())
      throw InvalidInput("LtiSystem: A must be square with n >= 1");
    if (B_.rows() != A_.rows() || B_.cols() < 1)
      throw InvalidInput("LtiSystem: B must have n rows and m >= 1 columns");
    if (C_.cols() != A_.rows() || C_.rows() < 1)
      throw InvalidInput("LtiSystem: C must have n columns and p >= 1 rows");
    if (!all_finite(A_) || !all_finite(B_) || !all_finite(C_))
      throw InvalidInput("LtiSystem: non-finite matrix entry");
  }

  const Matrix<Scalar>& A() const { return A_; }
  const Matrix<Scalar>& B() const { return B_; }
  const Matrix<Scalar>& C() const { return C_; }

  Eigen::Index n() const { return A_.rows(); }
  Eigen::Index m() const { return B_.cols(); }
  Eigen::Index p() const { return C_.rows(); }

  bool operator==(const LtiSystem& o) const {
    return A_ == o.A_ && B_ == o.B_ && C_ == o.C_;
  }

 private:
  Matrix<Scalar> A_;
  Matrix<Scalar> B_;
  Matrix<Scalar> C_;
};

/// Set of sensors identified by 1-based index, strictly increasing.
class SensorSubset {
 public:
  SensorSubset() = default;
  SensorSubset(std::vector<int> indices, Eigen::Index p)
      : indices_(std::move(indices)) {
    if (indices_.empty() || static_cast<Eigen::Index>(indices_.size()) > p)
      throw InvalidInput("SensorSubset: cardinality must lie in [1, p]");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (indices_[k] < 1 || indices_[k] > p)
        throw InvalidInput("SensorSubset: index " +
                           std::to_string(indices_[k]) + " outside [1, p]");
      if (k > 0 && indices_[k] <= indices_[k - 1])
        throw InvalidInput("SensorSubset: indices must be strictly increasing");
    }
  }

  static SensorSubset all(Eigen::Index p) {
    std::vector<int> idx(static_cast<std::size_t>(p));
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k) + 1;
    return SensorSubset(std::move(idx), p);
  }

  const std::vector<int>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  int operator[](std::size_t k) const { return indices_[k]; }
  /// 0-based row of C for the k-th member.
  Eigen::Index row(std::size_t k) const { return indices_[k] - 1; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  bool contains(int sensor) const {
    return std::binary_search(indices_.begin(), indices_.end(), sensor);
  }

  std::string to_string() const {
    std::string s = "{";
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(indices_[k]);
    }
    return s + "}";
  }

  auto operator<=>(const SensorSubset&) const = default;

 private:
  std::vector<int> indices_;
};

/// All k-subsets of {1..p} in lexicographic order.
inline std::vector<SensorSubset> combinations(Eigen::Index p, Eigen::Index k) {
  std::vector<SensorSubset> out;
  if (k < 1 || k > p) return out;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j) + 1;
  const int top = static_cast<int>(p);
  while (true) {
    out.emplace_back(idx, p);
    int j = static_cast<int>(k) - 1;
    while (j >= 0 && idx[j] == top - static_cast<int>(k) + j + 1) --j;
    if (j < 0) break;
    ++idx[j];
    for (std::size_t r = j + 1; r < idx.size(); ++r) idx[r] = idx[r - 1] + 1;
  }
  return out;
}

/// Orthonormal basis (as columns) of a subspace of R^n; zero columns means {0}.
template <typename Scalar = double>
struct KernelBasis {
  Matrix<Scalar> vectors;

  Eigen::Index dim() const { return vectors.cols(); }
  Eigen::Index ambient() const { return vectors.rows(); }

  /// I - V V^T. Its kernel is exactly the spanned subspace.
  Matrix<Scalar> complement_projector() const {
    return Matrix<Scalar>::Identity(ambient(), ambient()) -
           vectors * vectors.transpose();
  }

  /// Euclidean distance from v to the subspace.
  template <typename Derived>
  Scalar distance(const Eigen::MatrixBase<Derived>& v) const {
    if (dim() == 0) return v.norm();
    return (v - vectors * (vectors.transpose() * v)).norm();
  }
};

template <typename Scalar>
Scalar rank_threshold(Scalar sigma_max, Scalar tol_rank) {
  using std::max;
  return tol_rank * max(Scalar(1), sigma_max);
}

/// Number of singular values above tol_rank * max(1, sigma_max).
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& M,
                            typename Derived::Scalar tol_rank) {
  using Scalar = typename Derived::Scalar;
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(M.eval());
  const auto& sv = svd.singularValues();
  const Scalar thr = rank_threshold(sv(0), tol_rank);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > thr) ++r;
  return r;
}

/// Orthonormal basis of the numerical null space of M.
template <typename Derived>
KernelBasis<typename Derived::Scalar> kernel_basis(
    const Eigen::MatrixBase<Derived>& M, typename Derived::Scalar tol_rank) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return {Matrix<Scalar>::Identity(n, n)};
  Eigen::JacobiSVD<Matrix<Scalar>> svd(M.eval(), Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar thr = rank_threshold(sv(0), tol_rank);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > thr) ++r;
  return {svd.matrixV().rightCols(n - r)};
}

/// Orthonormal basis of range(M), dropping numerically negligible directions.
template <typename Derived>
KernelBasis<typename Derived::Scalar> orthonormal_range(
    const Eigen::MatrixBase<Derived>& M, typename Derived::Scalar tol_rank) {
  using Scalar = typename Derived::Scalar;
  if (M.cols() == 0) return {Matrix<Scalar>(M.rows(), 0)};
  Eigen::JacobiSVD<Matrix<Scalar>> svd(M.eval(), Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const Scalar thr = rank_threshold(sv(0), tol_rank);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > thr) ++r;
  return {svd.matrixU().leftCols(r)};
}

/// ker(M1) ⊆ ker(M2), decided by rank([M1; M2]) == rank(M1).
template <typename D1, typename D2>
bool kernel_included(const Eigen::MatrixBase<D1>& M1,
                     const Eigen::MatrixBase<D2>& M2,
                     typename D1::Scalar tol_rank) {
  using Scalar = typename D1::Scalar;
  if (M1.cols() != M2.cols())
    throw InvalidInput("kernel_included: column counts differ");
  Matrix<Scalar> stacked(M1.rows() + M2.rows(), M1.cols());
  stacked << M1, M2;
  return numerical_rank(stacked, tol_rank) == numerical_rank(M1, tol_rank);
}

template <typename Scalar>
Matrix<Scalar> matrix_power(const Matrix<Scalar>& A, std::size_t k) {
  Matrix<Scalar> P = Matrix<Scalar>::Identity(A.rows(), A.cols());
  for (std::size_t j = 0; j < k; ++j) P = A * P;
  return P;
}

/// Rows C_i A^k, k = 0..depth-1, for each sensor i in subset order; all rows
/// of the first sensor come first.
template <typename Scalar>
Matrix<Scalar> observability_matrix(const LtiSystem<Scalar>& sys,
                                    const SensorSubset& subset,
                                    std::size_t depth) {
  if (depth < 1) throw InvalidInput("observability_matrix: depth must be >= 1");
  const auto d = static_cast<Eigen::Index>(depth);
  Matrix<Scalar> O(static_cast<Eigen::Index>(subset.size()) * d, sys.n());
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] > sys.p())
      throw InvalidInput("observability_matrix: sensor index exceeds p");
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row = sys.C().row(subset.row(k));
    for (Eigen::Index j = 0; j < d; ++j) {
      O.row(static_cast<Eigen::Index>(k) * d + j) = row;
      row = row * sys.A();
    }
  }
  return O;
}

/// Every (p - r)-subset of sensors yields an observable pair (A, C_Gamma).
template <typename Scalar>
bool is_r_sparse_observable(const LtiSystem<Scalar>& sys, Eigen::Index r,
                            Scalar tol_rank) {
  if (r < 0 || r >= sys.p())
    throw InvalidInput("is_r_sparse_observable: need 0 <= r < p");
  const auto depth = static_cast<std::size_t>(sys.n());
  for (const auto& gamma : combinations(sys.p(), sys.p() - r)) {
    if (numerical_rank(observability_matrix(sys, gamma, depth), tol_rank) <
        sys.n())
      return false;
  }
  return true;
}

template <typename Scalar>
struct DiscretePair {
  Matrix<Scalar> A;
  Matrix<Scalar> B;
};

/// Zero-order-hold sampling: exp of the augmented block [[Ac, Bc], [0, 0]] dt
/// (scaling and squaring with a Pade approximant).
template <typename Scalar>
DiscretePair<Scalar> zoh_discretize(const Matrix<Scalar>& Ac,
                                    const Matrix<Scalar>& Bc, Scalar dt) {
  if (!(dt > Scalar(0))) throw InvalidInput("zoh_discretize: dt must be > 0");
  if (!all_finite(Ac) || !all_finite(Bc) || !std::isfinite(double(dt)))
    throw InvalidInput("zoh_discretize: non-finite input");
  if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows())
    throw InvalidInput("zoh_discretize: dimension mismatch");
  const Eigen::Index n = Ac.rows();
  const Eigen::Index m = Bc.cols();
  Matrix<Scalar> aug = Matrix<Scalar>::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Ac * dt;
  aug.topRightCorner(n, m) = Bc * dt;
  const Matrix<Scalar> e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

}  // namespace secbf
