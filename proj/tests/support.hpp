#pragma once

#include "hetwls/estimators.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using hetwls::Matrix;
using hetwls::Vector;

// Cyclic coordinate descent on sum_i w_i (y_i - x_i^T b)^2. Each coordinate
// update is the exact one-dimensional minimizer, so the iteration decreases
// the objective monotonically; it stops when a full sweep moves nothing.
inline Vector coordinate_descent(const Matrix& X, const Vector& y, const Vector& w,
                                 int max_sweeps = 2'000'000) {
  const auto n = X.rows();
  const auto p = X.cols();
  Vector b = Vector::Zero(p);
  Vector r = y;
  std::vector<double> col_norm(static_cast<std::size_t>(p), 0.0);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) col_norm[j] += w[i] * X(i, j) * X(i, j);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double biggest = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double num = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) num += w[i] * X(i, j) * r[i];
      const double step = num / col_norm[j];
      b[j] += step;
      for (Eigen::Index i = 0; i < n; ++i) r[i] -= step * X(i, j);
      biggest = std::max(biggest, std::abs(step) / std::max(1.0, std::abs(b[j])));
    }
    if (biggest < 1e-15) break;
  }
  return b;
}

struct RandomInstance {
  Matrix X;
  Vector y;
  Vector w;
};

// Gaussian design with an intercept column, positive weights spread over
// three orders of magnitude.
inline RandomInstance random_instance(std::mt19937_64& gen, int n, int p) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> logw(-1.5, 1.5);
  RandomInstance r{Matrix(n, p), Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    r.X(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) r.X(i, j) = normal(gen);
    r.y[i] = normal(gen);
    r.w[i] = std::pow(10.0, logw(gen));
  }
  return r;
}

// Quadratic truth on x ~ Unif(0, 1) with the discrete sigma law used in the
// coverage experiments; design rows (1, x).
inline hetwls::RegressionData quadratic_sample(std::mt19937_64& gen, int n,
                                               bool with_groups = true) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Matrix X(n, 2);
  Vector y(n), s(n);
  std::vector<int> g(static_cast<std::size_t>(n));
  const double levels[] = {0.01, 0.1, 1.0};
  for (int i = 0; i < n; ++i) {
    const double x = unif(gen);
    const double u = unif(gen);
    // The first three rows populate every group, even for small n.
    const int k = i < 3 ? i : (u < 0.05 ? 0 : (u < 0.95 ? 1 : 2));
    X(i, 0) = 1.0;
    X(i, 1) = x;
    s[i] = levels[k];
    g[static_cast<std::size_t>(i)] = k + 1;
    y[i] = x * x + s[i] * normal(gen);
  }
  if (!with_groups) return hetwls::RegressionData(X, y, s);
  return hetwls::RegressionData(X, y, s, g, 3);
}

}  // namespace testing_support
