#pragma once

// Dense symmetric / SPD linear algebra at embedding dimension (hundreds).
// Matrices are plain Eigen dense types; every function that returns a
// symmetric matrix mirrors the lower triangle so the result is exactly
// symmetric.

#include "fsprobe/core.hpp"
#include "fsprobe/rng.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace fsprobe {

template <class Scalar>
using SymMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPivotThreshold = 1e-12;
inline constexpr int kLanczosCap = 10000;

/// Copies the lower triangle onto the upper one.
template <class Derived>
SymMatrix<typename Derived::Scalar> symmetrize_lower(const Eigen::MatrixBase<Derived>& m) {
  SymMatrix<typename Derived::Scalar> out = m;
  out.template triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

/// Mean outer product of the centered columns of `points` (d x n).
template <class DerivedP, class DerivedM>
SymMatrix<typename DerivedP::Scalar> empirical_covariance(const Eigen::MatrixBase<DerivedP>& points,
                                                          const Eigen::MatrixBase<DerivedM>& mean) {
  using Scalar = typename DerivedP::Scalar;
  if (points.cols() == 0) throw Error(ErrorCode::EmptySet, "covariance of an empty point set");
  if (mean.size() != points.rows()) {
    throw Error(ErrorCode::DimMismatch, "mean has length " + std::to_string(mean.size()) +
                                            ", points have " + std::to_string(points.rows()));
  }
  const auto centered = (points.colwise() - mean.derived().col(0)).eval();
  SymMatrix<Scalar> cov = SymMatrix<Scalar>::Zero(points.rows(), points.rows());
  cov.template selfadjointView<Eigen::Lower>().rankUpdate(centered,
                                                          Scalar(1) / Scalar(points.cols()));
  return symmetrize_lower(cov);
}

/// (1 - lambda) * sigma + lambda * I.
template <class Derived>
SymMatrix<typename Derived::Scalar> shrink(const Eigen::MatrixBase<Derived>& sigma,
                                           typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda >= Scalar(0) && lambda <= Scalar(1))) {
    throw Error(ErrorCode::InvalidInput, "shrinkage lambda must lie in [0, 1]");
  }
  if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::DimMismatch, "matrix is not square");
  SymMatrix<Scalar> out = (Scalar(1) - lambda) * sigma;
  out.diagonal().array() += lambda;
  return symmetrize_lower(out);
}

/// Cholesky factor M = L L^T with the log-determinant cached.
template <class Scalar>
class SpdFactor {
 public:
  using MatrixType = SymMatrix<Scalar>;

  SpdFactor() = default;
  SpdFactor(MatrixType lower, Scalar log_det) : lower_(std::move(lower)), log_det_(log_det) {}

  Eigen::Index dim() const noexcept { return lower_.rows(); }
  const MatrixType& lower() const noexcept { return lower_; }
  Scalar log_det() const noexcept { return log_det_; }

  /// x^T M x evaluated as ||L^T x||^2.
  template <class Derived>
  Scalar quad_form(const Eigen::MatrixBase<Derived>& x) const {
    return (lower_.transpose().template triangularView<Eigen::Upper>() * x).squaredNorm();
  }

  /// Reconstructs L L^T.
  MatrixType reconstruct() const { return symmetrize_lower((lower_ * lower_.transpose()).eval()); }

 private:
  MatrixType lower_;
  Scalar log_det_ = Scalar(0);
};

/// Left-looking Cholesky. Throws NotPositiveDefinite carrying the first
/// pivot that is not above 1e-12.
template <class Derived>
SpdFactor<typename Derived::Scalar> spd_factorize(const Eigen::MatrixBase<Derived>& m,
                                                  const std::string& hint = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = m.rows();
  if (m.cols() != d) throw Error(ErrorCode::DimMismatch, "matrix is not square");
  SymMatrix<Scalar> lower = SymMatrix<Scalar>::Zero(d, d);
  Scalar log_det(0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Scalar pivot = m(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(pivot > Scalar(kPivotThreshold))) {
      throw NotPositiveDefinite(static_cast<std::size_t>(j), static_cast<double>(pivot), hint);
    }
    const Scalar ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    log_det += Scalar(2) * std::log(ljj);
    if (j + 1 < d) {
      const Eigen::Index rest = d - j - 1;
      lower.col(j).tail(rest) =
          (m.col(j).tail(rest) - lower.bottomLeftCorner(rest, j) * lower.row(j).head(j).transpose()) /
          ljj;
    }
  }
  return SpdFactor<Scalar>(std::move(lower), log_det);
}

/// Inverse of the factored matrix, L^{-T} L^{-1}.
template <class Scalar>
SymMatrix<Scalar> spd_inverse(const SpdFactor<Scalar>& f) {
  const Eigen::Index d = f.dim();
  SymMatrix<Scalar> linv = SymMatrix<Scalar>::Identity(d, d);
  f.lower().template triangularView<Eigen::Lower>().solveInPlace(linv);
  SymMatrix<Scalar> inv = SymMatrix<Scalar>::Zero(d, d);
  inv.template selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
  return symmetrize_lower(inv);
}

/// (z - w)^T m (z - w).
template <class DerivedZ, class DerivedW, class DerivedM>
typename DerivedZ::Scalar mahalanobis_sq(const Eigen::MatrixBase<DerivedZ>& z,
                                         const Eigen::MatrixBase<DerivedW>& w,
                                         const Eigen::MatrixBase<DerivedM>& m) {
  if (z.size() != w.size() || m.rows() != z.size() || m.cols() != z.size()) {
    throw Error(ErrorCode::DimMismatch, "mahalanobis_sq operand dimensions disagree");
  }
  const auto diff = (z - w).eval();
  return diff.dot(m * diff);
}

template <class DerivedZ, class DerivedW>
typename DerivedZ::Scalar mahalanobis_sq(const Eigen::MatrixBase<DerivedZ>& z,
                                         const Eigen::MatrixBase<DerivedW>& w,
                                         const SpdFactor<typename DerivedZ::Scalar>& f) {
  if (z.size() != w.size() || f.dim() != z.size()) {
    throw Error(ErrorCode::DimMismatch, "mahalanobis_sq operand dimensions disagree");
  }
  return f.quad_form((z - w).eval());
}

template <class Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

/// Largest eigenvalue of a symmetric matrix by Lanczos iteration from a
/// seeded random start, with full reorthogonalization. Stops once the Ritz
/// residual bound falls below `tol` relative to the estimate, or when the
/// Krylov space is exhausted (exact). A start vector annihilated by `m` is
/// redrawn. Throws NoConvergence after `max_iterations` Lanczos steps.
template <class Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& m, double tol = 1e-10,
                                        std::uint64_t seed = 0,
                                        int max_iterations = kLanczosCap) {
  using Scalar = typename Derived::Scalar;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index d = m.rows();
  if (m.cols() != d || d == 0) throw Error(ErrorCode::DimMismatch, "matrix is not square");
  const Scalar scale = m.norm();
  if (scale == Scalar(0)) return Scalar(0);

  Rng rng(seed);
  auto random_unit = [&] {
    VectorType v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = static_cast<Scalar>(rng.normal());
    return VectorType(v / v.norm());
  };

  VectorType q = random_unit();
  for (int attempt = 0; (m * q).norm() == Scalar(0); ++attempt) {
    if (attempt == 64) throw Error(ErrorCode::NoConvergence, "start vectors keep vanishing");
    q = random_unit();
  }

  const Eigen::Index steps = std::min<Eigen::Index>(d, max_iterations);
  MatrixType basis(d, steps);
  VectorType alpha(steps), beta(steps);
  Eigen::SelfAdjointEigenSolver<MatrixType> tri;
  Scalar theta(0);
  for (Eigen::Index k = 0; k < steps; ++k) {
    basis.col(k) = q;
    VectorType w = m * q;
    alpha(k) = q.dot(w);
    for (int pass = 0; pass < 2; ++pass) {
      w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    }
    beta(k) = w.norm();

    if (k == 0) {
      theta = alpha(0);
    } else {
      tri.computeFromTridiagonal(alpha.head(k + 1), beta.head(k), Eigen::ComputeEigenvectors);
      theta = tri.eigenvalues()(k);
    }
    const Scalar last = k == 0 ? Scalar(1) : tri.eigenvectors()(k, k);
    const Scalar residual = beta(k) * std::abs(last);
    const bool exhausted = beta(k) <= Scalar(1e-14) * scale || k + 1 == d;
    if (exhausted || residual <= Scalar(tol) * std::abs(theta)) return theta;
    q = w / beta(k);
  }
  throw Error(ErrorCode::NoConvergence,
              "Lanczos did not converge in " + std::to_string(max_iterations) + " steps");
}

}  // namespace fsprobe
