#pragma once

// Dense kernels shared by the mixture model: Gaussian log-densities through a
// Cholesky factor, weighted least squares with standard errors, and a stable
// log-sum-exp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "dogr/error.hpp"

namespace dogr {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Square matrix with exactly symmetric storage. Construction symmetrizes the
/// input as (A + A^T) / 2, which is bitwise symmetric in IEEE arithmetic.
template <typename Scalar>
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  template <typename Derived>
  explicit SymmetricMatrix(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw DimensionError("symmetric matrix must be square and non-empty");
    }
    entries_ = (m + m.transpose()) * Scalar(0.5);
  }

  static SymmetricMatrix identity(Eigen::Index dim) {
    return SymmetricMatrix(Matrix<Scalar>::Identity(dim, dim));
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix<Scalar>& matrix() const { return entries_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  /// Copy with `amount` added to the diagonal.
  SymmetricMatrix with_ridge(Scalar amount) const {
    SymmetricMatrix out = *this;
    out.entries_.diagonal().array() += amount;
    return out;
  }

  friend bool operator==(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    return a.entries_.rows() == b.entries_.rows() && a.entries_ == b.entries_;
  }

 private:
  Matrix<Scalar> entries_;
};

/// Cholesky factor of a covariance, reusable across many density evaluations.
template <typename Scalar>
class GaussianFactor {
 public:
  explicit GaussianFactor(const SymmetricMatrix<Scalar>& cov) : llt_(cov.matrix()) {
    if (llt_.info() != Eigen::Success || !cov.matrix().allFinite()) {
      throw FactorizationError("covariance is not positive definite");
    }
    const auto diag = llt_.matrixLLT().diagonal();
    if ((diag.array() <= Scalar(0)).any()) {
      throw FactorizationError("covariance is not positive definite");
    }
    log_det_ = Scalar(2) * diag.array().log().sum();
  }

  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }
  Scalar log_det() const { return log_det_; }

  template <typename DerivedX, typename DerivedM>
  Scalar log_density(const Eigen::MatrixBase<DerivedX>& x,
                     const Eigen::MatrixBase<DerivedM>& mean) const {
    if (x.size() != dim() || mean.size() != dim()) {
      throw DimensionError("mvn_log_density: dimension mismatch");
    }
    Vector<Scalar> z = x - mean;
    llt_.matrixL().solveInPlace(z);
    return normalizer() - Scalar(0.5) * z.squaredNorm();
  }

  /// Log-density of every row of `rows` (N x D). Returns a length-N vector.
  template <typename DerivedX, typename DerivedM>
  Vector<Scalar> log_density_rows(const Eigen::MatrixBase<DerivedX>& rows,
                                  const Eigen::MatrixBase<DerivedM>& mean) const {
    if (rows.cols() != dim() || mean.size() != dim()) {
      throw DimensionError("mvn_log_density: dimension mismatch");
    }
    // Columns of Z are centered points; one triangular solve for all of them.
    Matrix<Scalar> z = (rows.rowwise() - mean.transpose().template cast<Scalar>()).transpose();
    llt_.matrixL().solveInPlace(z);
    Vector<Scalar> out = z.colwise().squaredNorm().transpose();
    return (Scalar(-0.5) * out.array() + normalizer()).matrix();
  }

 private:
  Scalar normalizer() const {
    const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    return Scalar(-0.5) * (static_cast<Scalar>(dim()) * log_2pi + log_det_);
  }

  Eigen::LLT<Matrix<Scalar>> llt_;
  Scalar log_det_ = 0;
};

/// Log of the multivariate normal density N(x; mean, cov).
template <typename DerivedX, typename DerivedM, typename Scalar>
Scalar mvn_log_density(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedM>& mean,
                       const SymmetricMatrix<Scalar>& cov) {
  if (x.size() != cov.dim() || mean.size() != cov.dim()) {
    throw DimensionError("mvn_log_density: dimension mismatch");
  }
  return GaussianFactor<Scalar>(cov).log_density(x, mean);
}

/// log(sum(exp(v))) with max shift. Returns -inf when every entry is -inf.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) {
    throw DimensionError("log_sum_exp of an empty vector");
  }
  if (values.size() == 1) {
    return values(0);
  }
  const Scalar top = values.maxCoeff();
  if (!std::isfinite(top)) {
    return top;
  }
  return top + std::log((values.derived().array() - top).exp().sum());
}

template <typename Scalar>
struct WlsSolution {
  Vector<Scalar> coefficients;     // intercept first
  Vector<Scalar> standard_errors;  // same layout
  Scalar weighted_rss = 0;
  Scalar effective_weight = 0;  // sum of weights
};

/// Relative pivot size below which the (column-equilibrated) weighted design
/// is treated as rank deficient.
inline constexpr double kWlsRankThreshold = 1e-10;

/// Weighted least squares of y on [1, X]: minimizes sum_i w_i (y_i - b0 - b.x_i)^2.
///
/// Solved by column-pivoted QR of the row-scaled design sqrt(W)[1 X] after
/// scaling every column to unit norm. Standard errors are
/// sqrt(diag(s^2 (A^T W A)^-1)) with s^2 = WSS / (sum w - (p+1)); when the
/// weight mass does not exceed p+1 the denominator falls back to sum w.
template <typename DerivedX, typename DerivedY, typename DerivedW>
WlsSolution<typename DerivedX::Scalar> wls_fit(const Eigen::MatrixBase<DerivedX>& X,
                                               const Eigen::MatrixBase<DerivedY>& y,
                                               const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedX::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n || weights.size() != n) {
    throw DimensionError("wls_fit: X, y and weights disagree on the number of rows");
  }
  if (!(weights.array() >= Scalar(0)).all()) {
    throw DegenerateWeightsError("wls_fit: weights must be nonnegative and finite");
  }
  const Scalar total = weights.sum();
  if (!(total > Scalar(0)) || !std::isfinite(total)) {
    throw DegenerateWeightsError("wls_fit: weights are all zero");
  }

  const Vector<Scalar> root_w = weights.array().sqrt().matrix();
  Matrix<Scalar> design(n, p + 1);
  design.col(0) = root_w;
  design.rightCols(p) = root_w.asDiagonal() * X;
  const Vector<Scalar> target = root_w.cwiseProduct(y);

  Vector<Scalar> col_scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j <= p; ++j) {
    if (!(col_scale(j) > Scalar(0))) {
      throw SingularDesignError("wls_fit: design column " + std::to_string(j) +
                                " is zero under the given weights");
    }
    col_scale(j) = Scalar(1) / col_scale(j);
  }
  design = design * col_scale.asDiagonal();

  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(design);
  qr.setThreshold(static_cast<Scalar>(kWlsRankThreshold));
  if (qr.rank() < p + 1) {
    throw SingularDesignError("wls_fit: weighted design is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " + std::to_string(p + 1) + ")");
  }

  WlsSolution<Scalar> out;
  out.coefficients = col_scale.cwiseProduct(qr.solve(target));
  const Vector<Scalar> resid = y - X * out.coefficients.tail(p) -
                               Vector<Scalar>::Constant(n, out.coefficients(0));
  out.weighted_rss = (weights.array() * resid.array().square()).sum();
  out.effective_weight = total;

  // (A^T W A)^-1 = S P R^-1 R^-T P^T S for the scaled, pivoted factorization.
  const auto r = qr.matrixR().topLeftCorner(p + 1, p + 1).template triangularView<Eigen::Upper>();
  Matrix<Scalar> r_inv = r.solve(Matrix<Scalar>::Identity(p + 1, p + 1));
  const Vector<Scalar> row_norms = r_inv.rowwise().squaredNorm();
  const auto& perm = qr.colsPermutation().indices();

  const Scalar dof = total - static_cast<Scalar>(p + 1);
  const Scalar variance = out.weighted_rss / (dof > Scalar(0) ? dof : total);
  out.standard_errors.resize(p + 1);
  for (Eigen::Index i = 0; i <= p; ++i) {
    const Eigen::Index col = perm(i);
    out.standard_errors(col) = col_scale(col) * std::sqrt(variance * row_norms(i));
  }
  return out;
}

}  // namespace dogr
