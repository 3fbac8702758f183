#pragma once

namespace hetwls {

// P(X <= x) for X ~ chi-square with `dof` degrees of freedom.
double chi2_cdf(double x, int dof);

// Smallest x with chi2_cdf(x, dof) >= level, level in (0, 1). Two degrees of
// freedom use the closed form -2 ln(1 - level); other dof invert the
// regularized lower incomplete gamma by bisection.
double chi2_quantile(double level, int dof);

}  // namespace hetwls
