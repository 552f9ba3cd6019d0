#ifndef BRANCHSIM_SPECFUN_HPP
#define BRANCHSIM_SPECFUN_HPP

#include <cstddef>

namespace branchsim {

/// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a), a > 0.
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a,x) = 1 - P(a,x).
double gamma_q(double a, double x);

/// Lower incomplete gamma gamma(a,x) = integral_0^x s^{a-1} e^{-s} ds.
double lower_incomplete_gamma(double a, double x);

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2), clamped to [0,1].
double kolmogorov_sf(double lambda);

/// Survival function of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, int df);

}  // namespace branchsim

#endif  // BRANCHSIM_SPECFUN_HPP
