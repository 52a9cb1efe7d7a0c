#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace psnoma {

inline constexpr const char* kVersion = "0.1.0";

/// Probability mass function over the M constellation indices 1..M
/// (stored 0-based: p[i] = P{S = (i+1)*delta}).
using Pmf = std::vector<double>;

struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPmfSumTol = 1e-12;

inline bool is_pmf(const Pmf& p, double tol = kPmfSumTol) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol * std::max<std::size_t>(1, p.size());
}

inline void require_pmf(const Pmf& p, const char* what = "pmf") {
  if (p.empty() || !is_pmf(p))
    throw domain_error(std::string(what) + ": not a valid probability vector");
}

inline Pmf uniform_pmf(int m) {
  if (m < 1) throw domain_error("uniform_pmf: M must be >= 1");
  return Pmf(static_cast<std::size_t>(m), 1.0 / m);
}

/// Entropy in bits; terms with p_i = 0 contribute exactly 0.
inline double entropy_bits(const Pmf& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h;
}

/// Mean constellation index sum_i i*p_i with i = 1..M.
inline double mean_index(const Pmf& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (double(i) + 1.0) * p[i];
  return s;
}

inline double sq_distance(const Pmf& a, const Pmf& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double e = a[i] - b[i];
    d += e * e;
  }
  return d;
}

inline bool is_power_of_two(int m) { return m >= 1 && (m & (m - 1)) == 0; }

inline int log2_int(int m) {
  int l = 0;
  while ((1 << l) < m) ++l;
  return l;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace psnoma
