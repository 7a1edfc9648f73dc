#pragma once

#include <cmath>
#include <limits>
#include <type_traits>

#include "dplds/core.hpp"
#include "dplds/errors.hpp"

namespace dplds {

/// Privacy level (epsilon, delta) together with the prior-coverage
/// probability gamma used by the Bayesian variants of the checks.
template <typename Scalar>
struct PrivacyBudget {
  Scalar epsilon;
  Scalar delta;
  Scalar gamma;

  PrivacyBudget(Scalar epsilon_, Scalar delta_, Scalar gamma_)
      : epsilon(epsilon_), delta(delta_), gamma(gamma_) {
    if (!(std::isfinite(epsilon) && epsilon > Scalar(0)))
      throw DomainError("PrivacyBudget: epsilon must be finite and positive");
    if (!(delta > Scalar(0) && delta < Scalar(0.5)))
      throw DomainError("PrivacyBudget: delta must lie in (0, 1/2)");
    if (!(gamma >= Scalar(0) && gamma <= Scalar(1)))
      throw DomainError("PrivacyBudget: gamma must lie in [0, 1]");
  }
};

/// Upper-tail probability of the standard normal distribution.
template <typename Scalar>
Scalar q_function(Scalar c) {
  static_assert(std::is_floating_point_v<Scalar>);
  constexpr Scalar inv_sqrt2 = Scalar(0.707106781186547524400844362104849039L);
  return Scalar(0.5) * std::erfc(c * inv_sqrt2);
}

namespace detail {

template <typename Scalar>
Scalar standard_normal_pdf(Scalar x) {
  constexpr Scalar inv_sqrt_2pi = Scalar(0.398942280401432677939946059934381868L);
  return inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
}

// Acklam's rational approximation to the standard normal quantile,
// accurate to about 1.15e-9 over (0, 1).
template <typename Scalar>
Scalar acklam_normal_quantile(Scalar p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double pd = static_cast<double>(p);
  const double p_low = 0.02425;
  double x;
  if (pd < p_low) {
    const double q = std::sqrt(-2.0 * std::log(pd));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (pd <= 1.0 - p_low) {
    const double q = pd - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - pd));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return Scalar(x);
}

}  // namespace detail

/// Inverse of q_function on (0, 1). The rational initial guess is polished by
/// Newton iterations on q_function itself until the residual reaches roundoff.
template <typename Scalar>
Scalar q_inverse(Scalar p) {
  static_assert(std::is_floating_point_v<Scalar>);
  if (!(p > Scalar(0) && p < Scalar(1)))
    throw DomainError("q_inverse: argument must lie in the open interval (0, 1)");
  // Q^{-1}(p) = -Phi^{-1}(p)
  Scalar x = -detail::acklam_normal_quantile(p);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int iter = 0; iter < 8; ++iter) {
    const Scalar res = q_function(x) - p;
    const Scalar pdf = detail::standard_normal_pdf(x);
    if (pdf <= std::numeric_limits<Scalar>::min()) break;
    const Scalar step = res / pdf;  // Q' = -pdf
    x += step;
    if (std::abs(step) <= Scalar(4) * eps * std::max(Scalar(1), std::abs(x))) break;
  }
  return x;
}

/// Calibration threshold of the Gaussian mechanism: the required ratio of
/// noise scale to data sensitivity for an (epsilon, delta) guarantee.
template <typename Scalar>
Scalar r_threshold(Scalar epsilon, Scalar delta) {
  if (!(std::isfinite(epsilon) && epsilon > Scalar(0)))
    throw DomainError("r_threshold: epsilon must be finite and positive");
  if (!(delta > Scalar(0) && delta < Scalar(0.5)))
    throw DomainError("r_threshold: delta must lie in (0, 1/2)");
  const Scalar qd = q_inverse(delta);
  return (qd + std::sqrt(qd * qd + Scalar(2) * epsilon)) / (Scalar(2) * epsilon);
}

template <typename Scalar>
Scalar r_threshold(const PrivacyBudget<Scalar>& budget) {
  return r_threshold(budget.epsilon, budget.delta);
}

namespace detail {

// Regularized lower incomplete gamma P(a, x). Series expansion for
// x < a + 1, Lentz continued fraction for the complementary function
// otherwise; the usual split keeps both sides rapidly convergent.
template <typename Scalar>
Scalar gamma_p(Scalar a, Scalar x) {
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar fpmin = std::numeric_limits<Scalar>::min() / eps;
  if (x == Scalar(0)) return Scalar(0);
  const Scalar log_prefactor = a * std::log(x) - x - std::lgamma(a);
  if (x < a + Scalar(1)) {
    Scalar ap = a;
    Scalar del = Scalar(1) / a;
    Scalar sum = del;
    for (int n = 0; n < 10000; ++n) {
      ap += Scalar(1);
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * eps)
        return sum * std::exp(log_prefactor);
    }
    throw NumericError("gamma_p: series failed to converge");
  }
  // continued fraction for Q(a, x), then P = 1 - Q
  Scalar b = x + Scalar(1) - a;
  Scalar c = Scalar(1) / fpmin;
  Scalar d = Scalar(1) / b;
  Scalar h = d;
  for (int i = 1; i < 10000; ++i) {
    const Scalar an = -Scalar(i) * (Scalar(i) - a);
    b += Scalar(2);
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = Scalar(1) / d;
    const Scalar del = d * c;
    h *= del;
    if (std::abs(del - Scalar(1)) <= eps)
      return Scalar(1) - std::exp(log_prefactor) * h;
  }
  throw NumericError("gamma_p: continued fraction failed to converge");
}

template <typename Scalar>
Scalar chi2_pdf(Scalar x, Index dof) {
  const Scalar a = Scalar(dof) / Scalar(2);
  constexpr Scalar ln2 = Scalar(0.693147180559945309417232121458176568L);
  if (x <= Scalar(0))
    return dof == 1 ? std::numeric_limits<Scalar>::infinity()
                    : (dof == 2 ? Scalar(0.5) : Scalar(0));
  return std::exp((a - Scalar(1)) * std::log(x) - x / Scalar(2) - std::lgamma(a) - a * ln2);
}

}  // namespace detail

/// Chi-square cumulative distribution with `dof` degrees of freedom.
template <typename Scalar>
Scalar chi2_cdf(Scalar x, Index dof) {
  static_assert(std::is_floating_point_v<Scalar>);
  if (dof < 1) throw DomainError("chi2_cdf: dof must be at least 1");
  if (!(x >= Scalar(0))) throw DomainError("chi2_cdf: argument must be nonnegative");
  if (std::isinf(x)) return Scalar(1);
  return detail::gamma_p(Scalar(dof) / Scalar(2), x / Scalar(2));
}

/// Chi-square quantile: the x with chi2_cdf(x, dof) = gamma, gamma in (0, 1).
/// Wilson-Hilferty starting point, then Newton steps safeguarded by a
/// bracketing interval; stops when the CDF residual is below ~1e-13.
template <typename Scalar>
Scalar chi2_quantile(Scalar gamma, Index dof) {
  static_assert(std::is_floating_point_v<Scalar>);
  if (dof < 1) throw DomainError("chi2_quantile: dof must be at least 1");
  if (!(gamma > Scalar(0) && gamma < Scalar(1)))
    throw DomainError("chi2_quantile: gamma must lie in the open interval (0, 1)");

  const Scalar k = Scalar(dof);
  const Scalar z = -q_inverse(gamma);  // standard normal quantile
  const Scalar t = Scalar(1) - Scalar(2) / (Scalar(9) * k) +
                   z * std::sqrt(Scalar(2) / (Scalar(9) * k));
  Scalar x = t > Scalar(0) ? k * t * t * t : Scalar(1e-8);

  // bracket the root
  Scalar lo = Scalar(0), hi = std::max(x, Scalar(1));
  while (chi2_cdf(hi, dof) < gamma) {
    lo = hi;
    hi *= Scalar(2);
    if (hi > Scalar(1e300)) throw NumericError("chi2_quantile: bracket expansion failed");
  }
  if (x <= lo || x >= hi) x = (lo + hi) / Scalar(2);

  const Scalar tol = Scalar(1e-13);
  for (int iter = 0; iter < 200; ++iter) {
    const Scalar f = chi2_cdf(x, dof) - gamma;
    if (std::abs(f) <= tol) return x;
    if (f > Scalar(0))
      hi = x;
    else
      lo = x;
    const Scalar pdf = detail::chi2_pdf(x, dof);
    Scalar next = (pdf > Scalar(0) && std::isfinite(pdf)) ? x - f / pdf : lo;
    if (!(next > lo && next < hi)) next = (lo + hi) / Scalar(2);
    if (std::abs(next - x) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() * x)
      return next;
    x = next;
  }
  return x;
}

namespace detail {

/// Distance bound for a given number of effective degrees of freedom: the
/// gamma-quantile of the norm of the difference of two whitened draws.
template <typename Scalar>
Scalar pair_distance_bound_for_dof(Scalar gamma, Index dof) {
  if (dof < 1) throw DomainError("pair_distance_bound: dof must be at least 1");
  if (!(gamma >= Scalar(0) && gamma <= Scalar(1)))
    throw DomainError("pair_distance_bound: gamma must lie in [0, 1]");
  if (gamma == Scalar(0)) return Scalar(0);
  if (gamma == Scalar(1)) return std::numeric_limits<Scalar>::infinity();
  return std::sqrt(Scalar(2) * chi2_quantile(gamma, dof));
}

}  // namespace detail

/// Radius within which a pair of inputs drawn from the prior stays, in the
/// prior-whitened norm, with probability gamma. Grows without bound in the
/// horizon; gamma = 1 yields +infinity (no finite noise suffices).
template <typename Scalar>
Scalar pair_distance_bound(Scalar gamma, Index horizon, Index input_dim) {
  if (horizon < 0) throw DomainError("pair_distance_bound: horizon must be nonnegative");
  if (input_dim < 1) throw DomainError("pair_distance_bound: input_dim must be at least 1");
  return detail::pair_distance_bound_for_dof(gamma, (horizon + 1) * input_dim);
}

}  // namespace dplds
