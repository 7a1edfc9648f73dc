#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "dplds/core.hpp"
#include "dplds/covariance.hpp"
#include "dplds/errors.hpp"
#include "dplds/privacy.hpp"
#include "dplds/special_functions.hpp"
#include "dplds/state_space.hpp"

namespace dplds {

/// A synthesized mechanism together with its noise energy (covariance trace)
/// and the post-hoc verification of the condition it was designed against.
template <typename Scalar>
struct DesignResult {
  MechanismSpec<Scalar> mechanism;
  Scalar trace;
  CheckReport<Scalar> check;
  std::string formula;  // "optimal_output", "optimal_input" or "iid_input"
};

namespace detail {

template <typename Scalar>
Scalar design_scale(const GaussianPrior<Scalar>& prior, const PrivacyBudget<Scalar>& budget,
                    const char* who) {
  if (!prior.strict())
    throw DomainError(std::string(who) + ": prior must be strictly positive definite");
  if (!(budget.gamma > Scalar(0) && budget.gamma < Scalar(1)))
    throw InfeasibleError(std::string(who) +
                          ": gamma must lie strictly between 0 and 1 (gamma = 1 admits no "
                          "finite noise, gamma = 0 admits none at all)");
  const Scalar c = detail::pair_distance_bound_for_dof(budget.gamma, prior.dof());
  return c * r_threshold(budget);
}

}  // namespace detail

/// Trace-minimal output-noise covariance meeting the Bayesian condition:
/// Sigma_w = (c R)^2 N Sigma N^T, which matches the statistics of the
/// released output up to scale. Requires the lifted operator to have full
/// row rank; the constraint is then active at the optimum, which the
/// attached report confirms.
template <typename Scalar>
DesignResult<Scalar> optimal_output_noise(const GaussianPrior<Scalar>& prior,
                                          const LiftedOperator<Scalar>& lifted,
                                          const PrivacyBudget<Scalar>& budget) {
  if (prior.dim() != lifted.cols())
    throw DimensionError("optimal_output_noise: prior does not match the lifted input dimension");
  const Scalar scale = detail::design_scale(prior, budget, "optimal_output_noise");

  const Eigen::BDCSVD<MatrixX<Scalar>> svd(lifted.matrix());
  const auto& sv = svd.singularValues();
  const Scalar smax = sv(0);
  if (lifted.rows() > lifted.cols() || !(sv(lifted.rows() - 1) > Scalar(1e-10) * smax))
    throw RankError("optimal_output_noise: lifted operator must have full row rank "
                    "(sigma_min <= 1e-10 * sigma_max)");

  // factor of (cR)^2 N Sigma N^T; full row rank by the premise just checked
  MatrixX<Scalar> factor = scale * (lifted.matrix() * prior.covariance().factor());
  auto covariance = CovarianceMatrix<Scalar>::FromFactor(std::move(factor), lifted.rows());
  const Scalar trace = covariance.trace();
  MechanismSpec<Scalar> mechanism(NoiseChannel::kOutput, std::move(covariance));
  auto check = bdp_check(prior, mechanism, lifted, budget);
  return DesignResult<Scalar>{std::move(mechanism), trace, std::move(check), "optimal_output"};
}

/// Trace-minimal input-noise covariance: Sigma_v = (c R)^2 Sigma. Large
/// inputs demand proportionally large noise; the condition holds with
/// equality and does not depend on the system at all.
template <typename Scalar>
DesignResult<Scalar> optimal_input_noise(const GaussianPrior<Scalar>& prior,
                                         const PrivacyBudget<Scalar>& budget) {
  const Scalar scale = detail::design_scale(prior, budget, "optimal_input_noise");
  auto covariance = CovarianceMatrix<Scalar>::FromFactor(
      (scale * prior.covariance().factor()).eval(), prior.dim());
  const Scalar trace = covariance.trace();
  MechanismSpec<Scalar> mechanism(NoiseChannel::kInput, std::move(covariance));
  auto check = bdp_input_check(prior, mechanism, budget);
  return DesignResult<Scalar>{std::move(mechanism), trace, std::move(check), "optimal_input"};
}

/// Smallest isotropic input noise meeting the Bayesian condition:
/// sigma^2 = (c R)^2 lambda_max(Sigma). Never cheaper than the optimal
/// design; equal exactly when the prior is already isotropic.
template <typename Scalar>
DesignResult<Scalar> iid_input_noise(const GaussianPrior<Scalar>& prior,
                                     const PrivacyBudget<Scalar>& budget) {
  const Scalar scale = detail::design_scale(prior, budget, "iid_input_noise");
  const Scalar variance = scale * scale * prior.covariance().lambda_max();
  auto covariance = CovarianceMatrix<Scalar>::Isotropic(variance, prior.dim());
  const Scalar trace = covariance.trace();
  MechanismSpec<Scalar> mechanism(NoiseChannel::kInput, std::move(covariance));
  auto check = bdp_input_check(prior, mechanism, budget);
  return DesignResult<Scalar>{std::move(mechanism), trace, std::move(check), "iid_input"};
}

/// Prior of a reference generated by filtering standard white noise:
/// Sigma = Xi Xi^T with Xi the filter's lifted operator. The prior is strict
/// exactly when the filter feedthrough is nonsingular, which makes Xi full
/// row rank by its triangular structure; this is decided on the feedthrough,
/// not on a floating-point factorization of Sigma, which for long horizons
/// is far too ill-conditioned to classify. Singular feedthrough falls back
/// to a numerical-rank factorization.
template <typename Scalar>
GaussianPrior<Scalar> filter_prior(const StateSpaceModel<Scalar>& filter, Index horizon) {
  if (filter.output_dim() != filter.input_dim())
    throw DimensionError("filter_prior: filter must have as many outputs as driving noises");
  const LiftedOperator<Scalar> lifted = lift(filter, horizon);

  const Eigen::JacobiSVD<MatrixX<Scalar>> feedthrough_svd(filter.D());
  const auto& dsv = feedthrough_svd.singularValues();
  const Scalar lifted_scale = detail::largest_singular_value(lifted.matrix());
  const bool nonsingular_feedthrough =
      dsv(dsv.size() - 1) > Scalar(1e-10) * std::max(lifted_scale, Scalar(0));

  auto covariance = nonsingular_feedthrough
                        ? CovarianceMatrix<Scalar>::FromFactor(lifted.matrix(), lifted.rows())
                        : CovarianceMatrix<Scalar>::FromFactor(lifted.matrix());
  return GaussianPrior<Scalar>(std::move(covariance), horizon);
}

/// Prior of a step reference held constant over the horizon: every block of
/// the covariance equals the step covariance, so the rank stays at the step
/// dimension and the prior is degenerate for any horizon above zero.
template <typename Scalar>
GaussianPrior<Scalar> step_prior(const CovarianceMatrix<Scalar>& step_covariance, Index horizon) {
  if (horizon < 0) throw DomainError("step_prior: horizon must be nonnegative");
  const Index m = step_covariance.dim();
  const Index steps = horizon + 1;
  MatrixX<Scalar> tiled(steps * m, step_covariance.factor().cols());
  for (Index i = 0; i < steps; ++i)
    tiled.middleRows(i * m, m) = step_covariance.factor();
  // stacking identical row blocks preserves the rank of the step factor
  auto covariance = CovarianceMatrix<Scalar>::FromFactor(std::move(tiled), step_covariance.rank());
  return GaussianPrior<Scalar>(std::move(covariance), horizon);
}

/// Discrete-time Butterworth lowpass in state space: analog prototype poles,
/// prewarped cutoff, bilinear transform, then the controllable canonical
/// realization of the resulting rational function. `cutoff` is a fraction of
/// the Nyquist frequency.
template <typename Scalar>
StateSpaceModel<Scalar> lowpass_reference_model(Scalar cutoff, Index order) {
  if (!(cutoff > Scalar(0) && cutoff < Scalar(1)))
    throw DomainError("lowpass_reference_model: cutoff must lie in (0, 1)");
  if (order < 1) throw DomainError("lowpass_reference_model: order must be at least 1");

  using Complex = std::complex<Scalar>;
  constexpr Scalar pi = Scalar(3.141592653589793238462643383279502884L);
  const Index n = order;

  // analog prototype poles, scaled to the prewarped cutoff
  const Scalar fs = Scalar(2);
  const Scalar warped = Scalar(2) * fs * std::tan(pi * cutoff / fs);
  std::vector<Complex> poles(n);
  for (Index k = 0; k < n; ++k) {
    const Scalar angle = pi * Scalar(2 * k + n + 1) / Scalar(2 * n);
    poles[k] = warped * std::polar(Scalar(1), angle);
  }
  Scalar gain = std::pow(warped, Scalar(n));

  // bilinear transform: poles map to (2fs + p) / (2fs - p), all zeros to -1
  const Scalar fs2 = Scalar(2) * fs;
  Complex denominator_shift(1, 0);
  for (auto& p : poles) {
    denominator_shift *= (fs2 - p);
    p = (fs2 + p) / (fs2 - p);
  }
  gain /= denominator_shift.real();

  // expand num/den polynomials from roots; coefficients are real by conjugate
  // pairing
  const auto poly_from_roots = [](const std::vector<Complex>& roots) {
    std::vector<Complex> coeff{Complex(1, 0)};
    for (const auto& r : roots) {
      coeff.push_back(Complex(0, 0));
      for (Index i = static_cast<Index>(coeff.size()) - 1; i > 0; --i)
        coeff[i] -= r * coeff[i - 1];
    }
    return coeff;
  };
  const auto den_c = poly_from_roots(poles);
  const auto num_c = poly_from_roots(std::vector<Complex>(n, Complex(-1, 0)));

  // controllable canonical form
  MatrixX<Scalar> A = MatrixX<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) A(0, i) = -den_c[i + 1].real();
  A.block(1, 0, n - 1, n - 1).setIdentity();
  MatrixX<Scalar> B = MatrixX<Scalar>::Zero(n, 1);
  B(0, 0) = Scalar(1);
  const Scalar b0 = gain * num_c[0].real();
  MatrixX<Scalar> C(1, n);
  for (Index i = 0; i < n; ++i)
    C(0, i) = gain * num_c[i + 1].real() - b0 * den_c[i + 1].real();
  MatrixX<Scalar> D(1, 1);
  D(0, 0) = b0;
  return StateSpaceModel<Scalar>(std::move(A), std::move(B), std::move(C), std::move(D));
}

}  // namespace dplds
