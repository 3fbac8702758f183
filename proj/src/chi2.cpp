#include "hetwls/chi2.hpp"

#include "hetwls/types.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>

namespace hetwls {

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw Error(ErrorCode::InvalidArgument, "chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double level, int dof) {
  if (dof < 1) throw Error(ErrorCode::InvalidArgument, "chi2_quantile: dof must be >= 1");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "chi2_quantile: level must lie in (0, 1), got " + std::to_string(level));
  if (dof == 2) return -2.0 * std::log1p(-level);

  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi2_cdf(hi, dof) < level) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace hetwls
