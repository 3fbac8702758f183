#pragma once

#include <functional>
#include <span>

namespace hetwls {

inline constexpr double kQuadratureTolerance = 1e-10;

// Adaptive Gauss-Kronrod integral of f over [a, b]. The interval is first split
// at every breakpoint strictly inside it so that piecewise integrands with
// jumps or kinks at known locations converge. Throws QuadratureFailure if the
// combined error estimate exceeds tol * max(1, |integral|).
double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints = {}, double tol = kQuadratureTolerance);

}  // namespace hetwls
