/*
 * Copyright 2026 The richbll Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RICHBLL_DENSELA_HPP_
#define RICHBLL_DENSELA_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace richbll {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotSymmetric : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(what) + ": expected a square matrix, got " +
                            shape_string(a.rows(), a.cols()));
  }
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& a, const char* what,
                       double tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  require_square(a, what);
  if (a.size() == 0) return;
  const Scalar scale = std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());
  const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= Scalar(tol) * scale)) {
    throw NotSymmetric(std::string(what) + ": matrix is not symmetric (max |a - a^T| = " +
                       std::to_string(static_cast<double>(asym)) + ")");
  }
}

}  // namespace detail

/// Dense product with an explicit shape check.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + detail::shape_string(a.rows(), a.cols()) + " times " +
                            detail::shape_string(b.rows(), b.cols()));
  }
  Matrix<typename DerivedA::Scalar> out(a.rows(), b.cols());
  out.noalias() = a * b;
  return out;
}

/// Cholesky factor L (lower, positive diagonal) of a + jitter_used * I.
template <typename Scalar>
class LowerTriangularFactor {
 public:
  LowerTriangularFactor() = default;

  LowerTriangularFactor(Matrix<Scalar> lower, Scalar jitter_used)
      : l_(std::move(lower)), jitter_(jitter_used) {
    detail::require_square(l_, "LowerTriangularFactor");
    for (Eigen::Index i = 0; i < l_.rows(); ++i) {
      if (!(l_(i, i) > Scalar(0)) || !std::isfinite(static_cast<double>(l_(i, i)))) {
        throw NotPositiveDefinite("LowerTriangularFactor: non-positive diagonal entry at " +
                                  std::to_string(i));
      }
    }
    l_.template triangularView<Eigen::StrictlyUpper>().setZero();
  }

  static LowerTriangularFactor identity(Eigen::Index dim) {
    return LowerTriangularFactor(Matrix<Scalar>::Identity(dim, dim), Scalar(0));
  }

  Eigen::Index dim() const { return l_.rows(); }
  const Matrix<Scalar>& matrix() const { return l_; }
  Scalar jitter_used() const { return jitter_; }

  /// L * L^T.
  Matrix<Scalar> reconstruct() const { return l_ * l_.transpose(); }

 private:
  Matrix<Scalar> l_;
  Scalar jitter_ = Scalar(0);
};

/// Escalation ladder for diagonal jitter. Values are relative to mean(diag(a)),
/// or absolute when the diagonal mean is zero.
struct JitterPolicy {
  bool try_zero_first = true;
  double initial = 1e-10;
  double growth = 10.0;
  double maximum = 1e-4;
};

template <typename Derived>
LowerTriangularFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& a,
                                                         const JitterPolicy& policy = {}) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(a, "cholesky");
  const Eigen::Index n = a.rows();
  if (n == 0) return LowerTriangularFactor<Scalar>(Matrix<Scalar>(0, 0), Scalar(0));
  if (!a.allFinite()) throw NotPositiveDefinite("cholesky: non-finite input");

  Scalar scale = a.diagonal().mean();
  if (!(scale > Scalar(0))) scale = Scalar(1);

  std::vector<Scalar> ladder;
  if (policy.try_zero_first) ladder.push_back(Scalar(0));
  for (double j = policy.initial; j <= policy.maximum * (1.0 + 1e-9); j *= policy.growth) {
    ladder.push_back(Scalar(j) * scale);
  }

  Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  for (const Scalar jitter : ladder) {
    Matrix<Scalar> shifted = sym;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix<Scalar>> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Matrix<Scalar> l = llt.matrixL();
    if ((l.diagonal().array() > Scalar(0)).all() && l.allFinite()) {
      return LowerTriangularFactor<Scalar>(std::move(l), jitter);
    }
  }
  throw NotPositiveDefinite("cholesky: factorization failed at maximum jitter " +
                            std::to_string(static_cast<double>(ladder.back())));
}

enum class TriSide { Lower, LowerTranspose };

/// Solves L x = b (Lower) or L^T x = b (LowerTranspose).
template <typename Scalar, typename Derived>
Matrix<Scalar> tri_solve(const LowerTriangularFactor<Scalar>& l, const Eigen::MatrixBase<Derived>& b,
                         TriSide side) {
  if (l.dim() != b.rows()) {
    throw DimensionMismatch("tri_solve: factor dim " + std::to_string(l.dim()) + " vs rhs " +
                            detail::shape_string(b.rows(), b.cols()));
  }
  Matrix<Scalar> x = b;
  if (side == TriSide::Lower) {
    l.matrix().template triangularView<Eigen::Lower>().solveInPlace(x);
  } else {
    l.matrix().transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  }
  return x;
}

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi rotations.
/// Stops when the off-diagonal Frobenius norm drops below 1e-12 * ||a||_F or after 100 sweeps.
template <typename Derived>
std::vector<typename Derived::Scalar> sym_eigvals(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  detail::require_symmetric(a, "sym_eigvals");
  const Eigen::Index n = a.rows();
  Matrix<Scalar> w = (a + a.transpose()) / Scalar(2);

  const Scalar total = w.norm();
  const Scalar threshold = Scalar(1e-12) * total;
  auto off_norm = [&] {
    Scalar s(0);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += w(i, j) * w(i, j);
    return sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && total > Scalar(0); ++sweep) {
    if (off_norm() < threshold) break;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = w(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (w(q, q) - w(p, p)) / (Scalar(2) * apq);
        const Scalar sign = theta >= Scalar(0) ? Scalar(1) : Scalar(-1);
        const Scalar t = sign / (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        // w <- J^T w J on rows/cols p and q.
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar wkp = w(k, p);
          const Scalar wkq = w(k, q);
          w(k, p) = c * wkp - s * wkq;
          w(k, q) = s * wkp + c * wkq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar wpk = w(p, k);
          const Scalar wqk = w(q, k);
          w(p, k) = c * wpk - s * wqk;
          w(q, k) = s * wpk + c * wqk;
        }
        w(p, q) = Scalar(0);
        w(q, p) = Scalar(0);
      }
    }
  }

  std::vector<Scalar> eig(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = w(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

/// Largest singular value, as sqrt of the largest eigenvalue of the smaller Gram matrix.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  Matrix<Scalar> gram;
  if (a.cols() <= a.rows()) {
    gram.noalias() = a.transpose() * a;
  } else {
    gram.noalias() = a * a.transpose();
  }
  const auto eig = sym_eigvals(gram);
  using std::sqrt;
  return sqrt(std::max(Scalar(0), eig.back()));
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& a) {
  detail::require_square(a, "symmetrized");
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

/// ||a - b||_F / ||b||_F, with ||b||_F replaced by 1 when b is zero.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar relative_frobenius(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar denom = b.norm();
  return (a - b).norm() / (denom > Scalar(0) ? denom : Scalar(1));
}

}  // namespace richbll

#endif  // RICHBLL_DENSELA_HPP_
