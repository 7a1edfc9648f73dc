#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "dplds/core.hpp"
#include "dplds/errors.hpp"
#include "dplds/random.hpp"

namespace dplds {

/// Symmetric positive (semi)definite matrix with a cached factor F such that
/// matrix = F F^T. Strict matrices keep an invertible factor (the Cholesky
/// factor, or a caller-certified full-row-rank generator); semidefinite ones
/// keep a rank-revealing factor with the rank recorded. All spectral
/// quantities downstream are computed from the factor, never from explicit
/// inverses.
template <typename Scalar>
class CovarianceMatrix {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  // Strictness rule: the Cholesky factorization must succeed and every pivot
  // must stay above 1e-12 * trace / dim. Otherwise the matrix is classified
  // through its eigendecomposition; eigenvalues below -1e-10 * lambda_max are
  // rejected as indefinite and the rank is counted at 1e-10 * lambda_max.
  static constexpr Scalar kPivotTolerance = Scalar(1e-12);
  static constexpr Scalar kPsdTolerance = Scalar(1e-10);
  static constexpr Scalar kRankTolerance = Scalar(1e-10);
  static constexpr Scalar kSymmetryTolerance = Scalar(1e-12);
  // Relative residual above which a whitening solve is declared to have a
  // component outside the range of the covariance.
  static constexpr Scalar kRangeTolerance = Scalar(1e-8);

  explicit CovarianceMatrix(Matrix matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 1)
      throw DimensionError("CovarianceMatrix: matrix must be square and nonempty");
    if (!matrix.allFinite())
      throw DomainError("CovarianceMatrix: matrix must have finite entries");
    const Scalar scale = matrix.cwiseAbs().maxCoeff();
    const Scalar asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance * std::max(scale, Scalar(1)))
      throw DomainError("CovarianceMatrix: matrix is not symmetric");
    matrix_ = ((matrix + matrix.transpose()) / Scalar(2)).eval();

    const Index d = matrix_.rows();
    const Scalar pivot_floor = kPivotTolerance * matrix_.trace() / Scalar(d);

    Eigen::LLT<Matrix> llt(matrix_);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if ((lower.diagonal().array().square() > pivot_floor).all()) {
        factor_ = std::move(lower);
        rank_ = d;
        finalize();
        return;
      }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eigen(matrix_);
    if (eigen.info() != Eigen::Success)
      throw NumericError("CovarianceMatrix: eigendecomposition failed");
    const Vector values = eigen.eigenvalues();  // ascending
    const Scalar lambda_max = std::max(values(d - 1), Scalar(0));
    if (values(0) < -kPsdTolerance * lambda_max)
      throw DomainError("CovarianceMatrix: matrix is not positive semidefinite");
    Index rank = 0;
    for (Index i = 0; i < d; ++i)
      if (values(i) > kRankTolerance * lambda_max) ++rank;
    Matrix factor(d, rank);
    for (Index i = 0; i < rank; ++i) {
      const Index col = d - rank + i;  // largest eigenvalues sit at the end
      factor.col(i) = eigen.eigenvectors().col(col) * std::sqrt(values(col));
    }
    if (rank < d && lambda_max > Scalar(0))
      truncation_ratio_ = std::sqrt(std::max(values(d - rank - 1), Scalar(0)) / lambda_max);
    factor_ = std::move(factor);
    rank_ = rank;
    finalize();
  }

  /// Builds the covariance F F^T from a generator factor F (d x k). When
  /// `certified_rank` is given the caller vouches for rank(F) — used when the
  /// rank is known structurally (e.g. a triangular factor with nonsingular
  /// diagonal blocks) but is out of reach of floating-point rank revealing.
  /// Otherwise the rank is determined from the factor's singular values and
  /// the factor is replaced by its canonical truncation.
  static CovarianceMatrix FromFactor(Matrix f, std::optional<Index> certified_rank = std::nullopt) {
    if (f.rows() < 1) throw DimensionError("CovarianceMatrix: factor must have at least one row");
    if (!f.allFinite()) throw DomainError("CovarianceMatrix: factor must have finite entries");
    CovarianceMatrix out(Private{});
    out.matrix_ = (f * f.transpose()).eval();
    out.matrix_ = ((out.matrix_ + out.matrix_.transpose()) / Scalar(2)).eval();
    if (f.cols() == 0) {
      out.factor_ = std::move(f);
      out.rank_ = 0;
      out.finalize();
      return out;
    }
    if (certified_rank) {
      if (*certified_rank < 0 || *certified_rank > std::min(f.rows(), f.cols()))
        throw DimensionError("CovarianceMatrix: certified rank out of range");
      out.factor_ = std::move(f);
      out.rank_ = *certified_rank;
    } else {
      Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeThinU);
      const auto& sv = svd.singularValues();
      const Scalar smax = sv.size() > 0 ? sv(0) : Scalar(0);
      Index rank = 0;
      for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) * sv(i) > kRankTolerance * smax * smax) ++rank;
      Matrix canonical(f.rows(), rank);
      for (Index i = 0; i < rank; ++i) canonical.col(i) = svd.matrixU().col(i) * sv(i);
      if (rank < sv.size() && smax > Scalar(0)) out.truncation_ratio_ = sv(rank) / smax;
      out.factor_ = std::move(canonical);
      out.rank_ = rank;
    }
    out.finalize();
    return out;
  }

  static CovarianceMatrix Identity(Index dim) {
    return FromFactor(Matrix::Identity(dim, dim), dim);
  }

  static CovarianceMatrix Isotropic(Scalar variance, Index dim) {
    if (!(variance > Scalar(0)))
      throw DomainError("CovarianceMatrix: isotropic variance must be positive");
    return FromFactor(Matrix::Identity(dim, dim) * std::sqrt(variance), dim);
  }

  Index dim() const { return matrix_.rows(); }
  Index rank() const { return rank_; }
  bool strict() const { return rank_ == dim(); }
  const Matrix& matrix() const { return matrix_; }
  const Matrix& factor() const { return factor_; }
  Scalar trace() const { return matrix_.trace(); }

  /// Largest eigenvalue, as the squared largest singular value of the factor.
  Scalar lambda_max() const {
    return factor_singular_values_.size() > 0
               ? factor_singular_values_(0) * factor_singular_values_(0)
               : Scalar(0);
  }

  /// sigma_max / sigma_rank of the factor; feeds the precision estimate of
  /// quantities obtained by solving against the factor.
  Scalar factor_condition() const {
    if (rank_ == 0) return Scalar(1);
    const Scalar smin = factor_singular_values_(rank_ - 1);
    if (smin <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
    return factor_singular_values_(0) / smin;
  }

  /// Minimum-norm solution of factor * X = rhs. For strict covariances this
  /// realizes multiplication by the inverse factor; the minimum-norm solution
  /// against a wide certified factor carries the same singular values as the
  /// principal-square-root solve.
  Matrix solve_factor(const Matrix& rhs) const {
    if (!strict())
      throw DomainError("CovarianceMatrix: solve_factor requires a strictly positive definite matrix");
    if (rhs.rows() != dim())
      throw DimensionError("CovarianceMatrix: solve_factor dimension mismatch");
    return factor_solver_.solve(rhs);
  }

  /// Minimum-norm z with factor * z = x, or nullopt when x has a component
  /// outside the range of the covariance. |z| is then the
  /// inverse-covariance-weighted norm of x restricted to the range. The
  /// residual tolerance never drops below the rank-truncation level, so a
  /// vector that is in range up to the truncated directions still whitens.
  std::optional<Vector> whiten(const Vector& x) const {
    if (x.size() != dim()) throw DimensionError("CovarianceMatrix: whiten dimension mismatch");
    if (rank_ == 0) {
      if (x.norm() == Scalar(0)) return Vector::Zero(0);
      return std::nullopt;
    }
    Vector z = factor_solver_.solve(x);
    if (!strict()) {
      const Scalar tolerance = std::max(
          kRangeTolerance, Scalar(8) * std::sqrt(Scalar(dim())) * truncation_ratio_);
      const Scalar residual = (factor_ * z - x).norm();
      if (residual > tolerance * std::max(x.norm(), Scalar(1e-300)))
        return std::nullopt;
    }
    return z;
  }

  /// Draws a sample of N(0, matrix) as factor * z with standard normal z.
  Vector sample(std::mt19937_64& gen) const {
    return factor_ * standard_normal_vector<Scalar>(factor_.cols(), gen);
  }

 private:
  struct Private {};
  explicit CovarianceMatrix(Private) {}

  void finalize() {
    if (factor_.cols() == 0) {
      factor_singular_values_.resize(0);
      return;
    }
    Eigen::BDCSVD<Matrix> svd(factor_);
    factor_singular_values_ = svd.singularValues();
    factor_solver_.setThreshold(Scalar(1e-300));  // no truncation: rank is decided above
    factor_solver_.compute(factor_);
  }

  Matrix matrix_;
  Matrix factor_;  // d x k with k >= rank; matrix = factor factor^T
  Index rank_ = 0;
  Scalar truncation_ratio_ = Scalar(0);  // sigma of the largest discarded direction / sigma_max
  Vector factor_singular_values_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> factor_solver_;
};

/// Zero-mean (unless stated) Gaussian prior over the stacked input sequence
/// of a given horizon. The effective degrees of freedom equal the covariance
/// rank; degenerate priors are explicit and flow through the rank-projected
/// variants of the checks.
template <typename Scalar>
class GaussianPrior {
 public:
  using Vector = VectorX<Scalar>;

  GaussianPrior(Vector mean, CovarianceMatrix<Scalar> covariance, Index horizon)
      : mean_(std::move(mean)), covariance_(std::move(covariance)), horizon_(horizon) {
    validate();
  }

  GaussianPrior(CovarianceMatrix<Scalar> covariance, Index horizon)
      : mean_(Vector::Zero(covariance.dim())),  // members initialize in declaration order
        covariance_(std::move(covariance)),
        horizon_(horizon) {
    validate();
  }

  Index dim() const { return covariance_.dim(); }
  Index horizon() const { return horizon_; }
  Index input_dim() const { return dim() / (horizon_ + 1); }
  Index dof() const { return covariance_.rank(); }
  bool strict() const { return covariance_.strict(); }
  const Vector& mean() const { return mean_; }
  const CovarianceMatrix<Scalar>& covariance() const { return covariance_; }

  Vector sample(std::mt19937_64& gen) const { return mean_ + covariance_.sample(gen); }

 private:
  void validate() const {
    if (horizon_ < 0) throw DomainError("GaussianPrior: horizon must be nonnegative");
    if (mean_.size() != covariance_.dim())
      throw DimensionError("GaussianPrior: mean and covariance dimensions differ");
    if (covariance_.dim() % (horizon_ + 1) != 0)
      throw DimensionError("GaussianPrior: dimension must be (horizon + 1) times the input dimension");
  }

  Vector mean_;
  CovarianceMatrix<Scalar> covariance_;
  Index horizon_;
};

}  // namespace dplds
