#include "hetwls/quadrature.hpp"

#include "hetwls/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace hetwls {

double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints, double tol) {
  if (!(a < b)) throw Error(ErrorCode::InvalidArgument, "integrate: need a < b");
  std::vector<double> nodes{a};
  for (double x : breakpoints)
    if (x > a && x < b) nodes.push_back(x);
  nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, nodes[k], nodes[k + 1], 20, tol * 1e-2, &err);
    total_err += err;
  }
  if (!std::isfinite(total) || total_err > tol * std::max(1.0, std::abs(total))) {
    std::ostringstream msg;
    msg << "integrate: error estimate " << total_err << " exceeds tolerance " << tol;
    throw Error(ErrorCode::QuadratureFailure, msg.str());
  }
  return total;
}

}  // namespace hetwls
