#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "psnoma/common.hpp"

namespace psnoma {

/// Gauss-Hermite rule for integrals of the form
///   integral e^{-x^2} f(x) dx  ~=  sum_q weight[q] * f(node[q]).
/// Expectations under N(mu, sigma^2) follow as
///   E[f(Y)] ~= (1/sqrt(pi)) sum_q weight[q] * f(mu + sqrt(2)*sigma*node[q]).
struct QuadratureSpec {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  static QuadratureSpec gauss_hermite(int n);
};

namespace detail {

/// Orthonormal Hermite *functions* psi_j(x) = Htilde_j(x) e^{-x^2/2} at x,
/// returning (psi_n, psi_{n-1}). The function recurrence stays bounded, so
/// large orders neither overflow nor lose the Newton ratio.
inline std::pair<double, double> hermite_fn(int n, double x) {
  double p0 = 0.7511255444649425 * std::exp(-0.5 * x * x);  // pi^{-1/4} e^{-x^2/2}
  double pm1 = 0.0;
  for (int j = 0; j < n; ++j) {
    double next = x * std::sqrt(2.0 / (j + 1.0)) * p0 -
                  std::sqrt(double(j) / (j + 1.0)) * pm1;
    pm1 = p0;
    p0 = next;
  }
  return {p0, pm1};
}

}  // namespace detail

inline QuadratureSpec QuadratureSpec::gauss_hermite(int n) {
  if (n < 8) throw domain_error("gauss_hermite: node_count must be >= 8");
  QuadratureSpec q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const int m = (n + 1) / 2;
  std::vector<double> root(m);  // positive roots, descending

  auto newton = [&](double z) {
    for (int iter = 0; iter < 200; ++iter) {
      auto [pn, pnm1] = detail::hermite_fn(n, z);
      double dz = pn / (std::sqrt(2.0 * n) * pnm1);
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    return z;
  };

  for (int i = 0; i < m; ++i) {
    double z;
    if (i == 0) {
      z = newton(std::sqrt(2.0 * n + 1.0) -
                 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0));
    } else {
      // Bulk roots: walk down from the previous root in fractions of the
      // local WKB spacing pi/k(x) until the sign flips, bisect, polish.
      double r = root[i - 1];
      double k = std::sqrt(std::max(1.0, 2.0 * n + 1.0 - r * r));
      double step = 0.2 * std::numbers::pi / k;
      double a = r - 0.25 * step;
      double fa = detail::hermite_fn(n, a).first;
      double b = a - step;
      double fb = detail::hermite_fn(n, b).first;
      int walked = 0;
      while (fa * fb > 0.0 && walked++ < 400) {
        a = b;
        fa = fb;
        b -= step;
        fb = detail::hermite_fn(n, b).first;
      }
      if (fa * fb > 0.0)
        throw convergence_error("gauss_hermite: failed to bracket a root");
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b);
        double fm = detail::hermite_fn(n, mid).first;
        if (fa * fm <= 0.0) {
          b = mid;
          fb = fm;
        } else {
          a = mid;
          fa = fm;
        }
        if (std::abs(a - b) < 1e-14 * std::max(1.0, std::abs(a))) break;
      }
      z = newton(0.5 * (a + b));
    }
    root[i] = z;
    if (i > 0 && !(root[i] < root[i - 1]))
      throw convergence_error("gauss_hermite: root ordering lost");
    double psi_nm1 = detail::hermite_fn(n, z).second;
    double w = std::exp(-z * z) / (n * psi_nm1 * psi_nm1);
    q.nodes[i] = -z;  // ascending order, negative half first
    q.nodes[n - 1 - i] = z;
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.nodes[m - 1] = 0.0;
  return q;
}

}  // namespace psnoma
