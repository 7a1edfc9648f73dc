#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "dplds/core.hpp"
#include "dplds/covariance.hpp"
#include "dplds/errors.hpp"
#include "dplds/random.hpp"
#include "dplds/special_functions.hpp"
#include "dplds/state_space.hpp"

namespace dplds {

enum class NoiseChannel { kOutput, kInput };

/// Gaussian noise mechanism: noise with the given mean and covariance added
/// to the output sequence or to the input sequence of the released system.
template <typename Scalar>
class MechanismSpec {
 public:
  using Vector = VectorX<Scalar>;

  MechanismSpec(NoiseChannel channel, Vector mean, CovarianceMatrix<Scalar> covariance)
      : channel_(channel), mean_(std::move(mean)), covariance_(std::move(covariance)) {
    validate();
  }

  MechanismSpec(NoiseChannel channel, CovarianceMatrix<Scalar> covariance)
      : channel_(channel),
        mean_(Vector::Zero(covariance.dim())),  // members initialize in declaration order
        covariance_(std::move(covariance)) {
    validate();
  }

  NoiseChannel channel() const { return channel_; }
  const Vector& mean() const { return mean_; }
  const CovarianceMatrix<Scalar>& covariance() const { return covariance_; }
  Index dim() const { return covariance_.dim(); }

  Vector sample(std::mt19937_64& gen) const { return mean_ + covariance_.sample(gen); }

 private:
  void validate() const {
    if (mean_.size() != covariance_.dim())
      throw DimensionError("MechanismSpec: mean and covariance dimensions differ");
    if (!covariance_.strict())
      throw DomainError("MechanismSpec: noise covariance must be strictly positive definite");
  }

  NoiseChannel channel_;
  Vector mean_;
  CovarianceMatrix<Scalar> covariance_;
};

/// Outcome of a privacy condition: the computed spectral quantity (lhs), the
/// required threshold (rhs) and their margin. `precision` estimates the
/// numerical resolution of lhs (a first-order conditioning bound); a margin
/// within -precision still counts as satisfied, and the field is part of the
/// report so borderline verdicts are auditable. Empirical estimates carry the
/// optional sample fields.
template <typename Scalar>
struct CheckReport {
  bool satisfied = false;
  Scalar lhs = Scalar(0);
  Scalar rhs = Scalar(0);
  Scalar margin = Scalar(0);
  Scalar precision = Scalar(0);
  Scalar epsilon = Scalar(0);
  Scalar delta = Scalar(0);
  Scalar gamma = Scalar(0);
  Index horizon = 0;
  std::optional<Index> samples;
  std::optional<Scalar> gamma_hat;
  std::optional<Scalar> ci;
};

namespace detail {

template <typename Scalar>
CheckReport<Scalar> make_report(Scalar lhs, Scalar rhs, Scalar precision,
                                const PrivacyBudget<Scalar>& budget, Index horizon) {
  CheckReport<Scalar> report;
  report.lhs = lhs;
  report.rhs = rhs;
  report.precision = precision;
  report.epsilon = budget.epsilon;
  report.delta = budget.delta;
  report.gamma = budget.gamma;
  report.horizon = horizon;
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  if (lhs == inf) {
    report.margin = inf;
    report.satisfied = true;
  } else if (rhs == inf) {
    report.margin = -inf;
    report.satisfied = false;
  } else {
    report.margin = lhs - rhs;
    report.satisfied = report.margin >= -precision;
  }
  return report;
}

template <typename Scalar>
Scalar largest_singular_value(const MatrixX<Scalar>& m) {
  if (m.rows() == 0 || m.cols() == 0) return Scalar(0);
  return Eigen::BDCSVD<MatrixX<Scalar>>(m).singularValues()(0);
}

// lhs = 1 / sigma_max(M); sigma_max == 0 means nothing is released and the
// condition holds vacuously (+infinity sentinel).
template <typename Scalar>
Scalar inverse_sigma_max(const MatrixX<Scalar>& m) {
  const Scalar smax = largest_singular_value(m);
  if (smax == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return Scalar(1) / smax;
}

// First-order resolution of a spectral quantity obtained through factor
// solves: roundoff eps, amplified by the solve conditioning and a mild
// dimensional growth factor.
template <typename Scalar>
Scalar solve_precision(Scalar lhs, Scalar condition, Index dim) {
  if (!std::isfinite(lhs)) return Scalar(0);
  const Scalar growth = Scalar(1) + std::sqrt(Scalar(dim));
  return std::numeric_limits<Scalar>::epsilon() * condition * growth * std::max(lhs, Scalar(1));
}

}  // namespace detail

/// Differential-privacy sufficient condition for an output-noise Gaussian
/// mechanism under a quadratic adjacency weight K:
///   lambda_max^{-1/2}(K^{-1/2} N^T Sigma_w^{-1} N K^{-1/2}) >= R(epsilon, delta).
/// Computed as 1 / sigma_max(F_w^{-1} N F_K^{-T}) from the cached factors.
template <typename Scalar>
CheckReport<Scalar> dp_check(const CovarianceMatrix<Scalar>& adjacency_weight,
                             const MechanismSpec<Scalar>& mechanism,
                             const LiftedOperator<Scalar>& lifted,
                             const PrivacyBudget<Scalar>& budget) {
  if (mechanism.channel() != NoiseChannel::kOutput)
    throw DomainError("dp_check: expects an output-noise mechanism");
  if (!adjacency_weight.strict())
    throw DomainError("dp_check: adjacency weight must be strictly positive definite");
  if (adjacency_weight.dim() != lifted.cols())
    throw DimensionError("dp_check: adjacency weight does not match the lifted input dimension");
  if (mechanism.dim() != lifted.rows())
    throw DimensionError("dp_check: noise covariance does not match the lifted output dimension");

  const MatrixX<Scalar> whitened = mechanism.covariance().solve_factor(lifted.matrix());
  // right-multiplication by F_K^{-T} via a transposed solve
  const MatrixX<Scalar> weighted =
      adjacency_weight.solve_factor(whitened.transpose()).transpose();
  const Scalar lhs = detail::inverse_sigma_max(weighted);
  const Scalar rhs = r_threshold(budget);
  const Scalar precision = detail::solve_precision(
      lhs, mechanism.covariance().factor_condition() * adjacency_weight.factor_condition(),
      std::max(lifted.rows(), lifted.cols()));
  return detail::make_report(lhs, rhs, precision, budget, lifted.horizon());
}

/// Bayesian sufficient condition for an output-noise mechanism under a
/// Gaussian prior:
///   lambda_max^{-1/2}(Sigma^{1/2} N^T Sigma_w^{-1} N Sigma^{1/2})
///     >= c(gamma, dof) * R(epsilon, delta),
/// computed as 1 / sigma_max(F_w^{-1} N F_Sigma). Degenerate priors use their
/// rank both as the factor width and as the chi-square degrees of freedom.
template <typename Scalar>
CheckReport<Scalar> bdp_check(const GaussianPrior<Scalar>& prior,
                              const MechanismSpec<Scalar>& mechanism,
                              const LiftedOperator<Scalar>& lifted,
                              const PrivacyBudget<Scalar>& budget) {
  if (mechanism.channel() != NoiseChannel::kOutput)
    throw DomainError("bdp_check: expects an output-noise mechanism");
  if (prior.dim() != lifted.cols())
    throw DimensionError("bdp_check: prior does not match the lifted input dimension");
  if (mechanism.dim() != lifted.rows())
    throw DimensionError("bdp_check: noise covariance does not match the lifted output dimension");

  const MatrixX<Scalar> weighted = mechanism.covariance().solve_factor(
      lifted.matrix() * prior.covariance().factor());
  const Scalar lhs = detail::inverse_sigma_max(weighted);
  const Scalar rhs =
      detail::pair_distance_bound_for_dof(budget.gamma, prior.dof()) * r_threshold(budget);
  const Scalar precision = detail::solve_precision(
      lhs, mechanism.covariance().factor_condition(), std::max(lifted.rows(), lifted.cols()));
  return detail::make_report(lhs, rhs, precision, budget, lifted.horizon());
}

/// Bayesian sufficient condition for an input-noise mechanism. The condition
///   lambda_min^{1/2}(Sigma^{-1/2} Sigma_v Sigma^{-1/2}) >= c * R
/// does not involve the system matrices at all; it is evaluated as
/// 1 / sigma_max(F_v^{-1} F_Sigma), which coincides with the minimum singular
/// value form for strict priors and restricts to the prior's range otherwise.
template <typename Scalar>
CheckReport<Scalar> bdp_input_check(const GaussianPrior<Scalar>& prior,
                                    const MechanismSpec<Scalar>& mechanism,
                                    const PrivacyBudget<Scalar>& budget) {
  if (mechanism.channel() != NoiseChannel::kInput)
    throw DomainError("bdp_input_check: expects an input-noise mechanism");
  if (mechanism.dim() != prior.dim())
    throw DimensionError("bdp_input_check: noise covariance does not match the prior dimension");

  const MatrixX<Scalar> weighted =
      mechanism.covariance().solve_factor(prior.covariance().factor());
  const Scalar lhs = detail::inverse_sigma_max(weighted);
  const Scalar rhs =
      detail::pair_distance_bound_for_dof(budget.gamma, prior.dof()) * r_threshold(budget);
  const Scalar precision =
      detail::solve_precision(lhs, mechanism.covariance().factor_condition(), prior.dim());
  return detail::make_report(lhs, rhs, precision, budget, prior.horizon());
}

/// Adjacency weight whose differential-privacy condition coincides with the
/// Bayesian condition for the given prior: K = Sigma^{-1} / c(gamma, T)^2.
template <typename Scalar>
CovarianceMatrix<Scalar> prior_adjacency_weight(const GaussianPrior<Scalar>& prior,
                                                Scalar gamma, Index horizon) {
  if (!prior.strict())
    throw DomainError("prior_adjacency_weight: prior must be strictly positive definite");
  if (!(gamma > Scalar(0) && gamma < Scalar(1)))
    throw InfeasibleError("prior_adjacency_weight: gamma in {0, 1} gives a degenerate weight");
  const Scalar c = pair_distance_bound(gamma, horizon, prior.input_dim());
  const MatrixX<Scalar> inv_factor = prior.covariance().solve_factor(
      MatrixX<Scalar>::Identity(prior.dim(), prior.dim()));
  MatrixX<Scalar> weight = inv_factor.transpose() * inv_factor / (c * c);
  weight = ((weight + weight.transpose()) / Scalar(2)).eval();
  return CovarianceMatrix<Scalar>(std::move(weight));
}

/// Smallest delta certified by the Gaussian tail bound for one specific input
/// pair: Q(epsilon h - 1/(2h)) with h the inverse noise-weighted distance of
/// the two noiseless outputs. Equal inputs give h = +infinity and delta = 0.
template <typename Scalar>
Scalar pairwise_delta(const Trajectory<Scalar>& input_a, const Trajectory<Scalar>& input_b,
                      const LiftedOperator<Scalar>& lifted,
                      const CovarianceMatrix<Scalar>& noise_covariance, Scalar epsilon) {
  if (!(std::isfinite(epsilon) && epsilon > Scalar(0)))
    throw DomainError("pairwise_delta: epsilon must be finite and positive");
  if (!noise_covariance.strict())
    throw DomainError("pairwise_delta: noise covariance must be strictly positive definite");
  if (noise_covariance.dim() != lifted.rows())
    throw DimensionError("pairwise_delta: noise covariance does not match the lifted output dimension");
  if (input_a.dim() != input_b.dim() || input_a.horizon() != input_b.horizon())
    throw DimensionError("pairwise_delta: the two inputs must share dimension and horizon");

  const VectorX<Scalar> diff = lifted.apply(input_a.stacked() - input_b.stacked());
  const Scalar dist = noise_covariance.whiten(diff)->norm();
  if (dist == Scalar(0)) return Scalar(0);  // h = +infinity
  const Scalar h = Scalar(1) / dist;
  return q_function(epsilon * h - Scalar(1) / (Scalar(2) * h));
}

/// Monte-Carlo estimate of the coverage probability: the fraction of
/// independent prior pairs whose inverse noise-weighted output distance h
/// clears R(epsilon, delta). Pair i is drawn from substream (seed, i), so the
/// estimate is reproducible and splittable across workers by sample range.
/// Input-noise mechanisms are folded through the system into the equivalent
/// output noise N Sigma_v N^T.
template <typename Scalar>
CheckReport<Scalar> empirical_bdp(const GaussianPrior<Scalar>& prior,
                                  const MechanismSpec<Scalar>& mechanism,
                                  const LiftedOperator<Scalar>& lifted,
                                  const PrivacyBudget<Scalar>& budget,
                                  Index samples, std::uint64_t seed) {
  if (samples < 1) throw DomainError("empirical_bdp: needs at least one sample");
  if (!prior.strict())
    throw DomainError("empirical_bdp: prior must be strictly positive definite");
  if (prior.dim() != lifted.cols())
    throw DimensionError("empirical_bdp: prior does not match the lifted input dimension");

  std::optional<CovarianceMatrix<Scalar>> equivalent;
  if (mechanism.channel() == NoiseChannel::kInput) {
    if (mechanism.dim() != lifted.cols())
      throw DimensionError("empirical_bdp: input noise does not match the lifted input dimension");
    equivalent = CovarianceMatrix<Scalar>::FromFactor(
        lifted.matrix() * mechanism.covariance().factor());
  } else if (mechanism.dim() != lifted.rows()) {
    throw DimensionError("empirical_bdp: output noise does not match the lifted output dimension");
  }
  const CovarianceMatrix<Scalar>& noise =
      equivalent ? *equivalent : mechanism.covariance();

  const Scalar threshold = r_threshold(budget);
  Index hits = 0;
  for (Index i = 0; i < samples; ++i) {
    std::mt19937_64 gen = substream(seed, static_cast<std::uint64_t>(i));
    const VectorX<Scalar> diff = prior.sample(gen) - prior.sample(gen);
    const VectorX<Scalar> output_diff = lifted.matrix() * diff;
    const auto whitened = noise.whiten(output_diff);
    if (!whitened) continue;  // difference escapes the noise range: h = 0
    const Scalar dist = whitened->norm();
    const Scalar h = dist == Scalar(0) ? std::numeric_limits<Scalar>::infinity()
                                       : Scalar(1) / dist;
    if (h >= threshold) ++hits;
  }

  const Scalar gamma_hat = Scalar(hits) / Scalar(samples);
  CheckReport<Scalar> report;
  report.lhs = gamma_hat;
  report.rhs = budget.gamma;
  report.margin = gamma_hat - budget.gamma;
  report.precision = Scalar(0);
  report.satisfied = gamma_hat >= budget.gamma;
  report.epsilon = budget.epsilon;
  report.delta = budget.delta;
  report.gamma = budget.gamma;
  report.horizon = lifted.horizon();
  report.samples = samples;
  report.gamma_hat = gamma_hat;
  // normal-approximation 95% half width
  report.ci = Scalar(1.96) * std::sqrt(gamma_hat * (Scalar(1) - gamma_hat) / Scalar(samples));
  return report;
}

}  // namespace dplds
