#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "psnoma/channel.hpp"
#include "psnoma/common.hpp"
#include "psnoma/quadrature.hpp"

namespace psnoma {

inline constexpr double kLn2 = std::numbers::ln2;
/// Floor substituted for exact-zero probabilities inside log denominators.
inline constexpr double kLogFloor = 1e-300;

/// Unipolar M-PAM alphabet of one user: symbols {delta, 2*delta, ..., M*delta}.
struct ShapedConstellation {
  double delta;
  Pmf pmf;

  void validate() const {
    if (!(delta > 0.0)) throw domain_error("constellation: delta must be > 0");
    require_pmf(pmf, "constellation");
  }
  int order() const { return static_cast<int>(pmf.size()); }
};

struct CodingConfig {
  double r_fec = 1.0;   // code rate in (0, 1]
  double r_bf = 0.05;   // back-off rate margin

  void validate() const {
    if (!(r_fec > 0.0 && r_fec <= 1.0))
      throw domain_error("coding: R_FEC must lie in (0,1]");
    if (r_bf < 0.0) throw domain_error("coding: R_bf must be >= 0");
  }
};

/// One not-yet-cancelled user as seen at the decoder of user j.
struct Interferer {
  double delta;
  Pmf pmf;
  double gain = 1.0;   // h_k
  double alpha = 1.0;  // alpha_k
  double coeff() const { return gain * alpha; }
};

/// Spacings and PMFs of users j+1..N (possibly empty).
struct InterferenceProfile {
  std::vector<Interferer> entries;
  std::size_t term_cap = 1'000'000;

  bool empty() const { return entries.empty(); }
};

/// Discrete mixture induced by the interferers: every joint symbol tuple
/// becomes one (offset, weight) component. Zero-probability entries are
/// dropped after the cap check.
struct InterferenceMixture {
  std::vector<double> offsets;
  std::vector<double> weights;
  std::vector<double> log_weights;  // natural log

  std::size_t size() const { return offsets.size(); }
};

inline InterferenceMixture expand_interference(const InterferenceProfile& intf) {
  std::size_t total = 1;
  for (const auto& e : intf.entries) {
    if (!(e.delta > 0.0)) throw domain_error("interferer: delta must be > 0");
    require_pmf(e.pmf, "interferer");
    total *= e.pmf.size();
    if (total > intf.term_cap)
      throw domain_error("interference mixture exceeds term cap");
  }
  InterferenceMixture mix;
  mix.offsets.assign(1, 0.0);
  mix.weights.assign(1, 1.0);
  for (const auto& e : intf.entries) {
    std::vector<double> off, w;
    off.reserve(mix.size() * e.pmf.size());
    w.reserve(mix.size() * e.pmf.size());
    for (std::size_t t = 0; t < mix.size(); ++t) {
      for (std::size_t i = 0; i < e.pmf.size(); ++i) {
        if (e.pmf[i] == 0.0) continue;
        off.push_back(mix.offsets[t] + e.coeff() * e.delta * (double(i) + 1.0));
        w.push_back(mix.weights[t] * e.pmf[i]);
      }
    }
    mix.offsets = std::move(off);
    mix.weights = std::move(w);
  }
  mix.log_weights.resize(mix.size());
  for (std::size_t t = 0; t < mix.size(); ++t)
    mix.log_weights[t] = std::log(mix.weights[t]);
  return mix;
}

/// f(yhat | s_ji): Gaussian mixture over the interferer symbol tuples,
/// centred at coeff_j*s_ji + sum_k coeff_k*s_k, common variance sigma^2.
inline double conditional_pdf(double yhat, double s_ji, double sigma,
                              const InterferenceProfile& intf,
                              double coeff_j = 1.0) {
  if (!(sigma > 0.0)) throw domain_error("conditional_pdf: sigma must be > 0");
  InterferenceMixture mix = expand_interference(intf);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
  double f = 0.0;
  for (std::size_t t = 0; t < mix.size(); ++t) {
    double d = yhat - coeff_j * s_ji - mix.offsets[t];
    f += mix.weights[t] * norm * std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return f;
}

inline double conditional_pdf(double yhat, double s_ji, const NomaScenario& scn,
                              int user_j, const InterferenceProfile& intf) {
  return conditional_pdf(yhat, s_ji, scn.sigma(), intf,
                         scn.gain(user_j) * scn.alpha(user_j));
}

namespace detail {

/// Shared evaluation lattice for the conditional-entropy integrals: the
/// component means mu[i][t] = coeff*delta*(i+1) + offset[t] and per-point
/// log-density machinery with the Gaussian constant dropped (it cancels
/// in every ratio this file computes).
struct DensityLattice {
  int m;
  double inv_two_sigma_sq;
  std::vector<double> means;        // m * T, row-major by i
  std::vector<double> log_mix_w;    // T
  std::vector<double> mix_w;        // T
  std::size_t t_count;

  DensityLattice(int m_order, double delta, double sigma,
                 const InterferenceMixture& mix, double coeff)
      : m(m_order), inv_two_sigma_sq(1.0 / (2.0 * sigma * sigma)),
        log_mix_w(mix.log_weights), mix_w(mix.weights), t_count(mix.size()) {
    means.resize(std::size_t(m) * t_count);
    for (int i = 0; i < m; ++i)
      for (std::size_t t = 0; t < t_count; ++t)
        means[std::size_t(i) * t_count + t] =
            coeff * delta * (i + 1.0) + mix.offsets[t];
  }

  /// Natural-log conditional densities ln f(y|s_i) + const, all i at once.
  /// scratch must have size m*t_count.
  void log_cond_all(double y, std::vector<double>& scratch,
                    std::vector<double>& log_cond) const {
    for (std::size_t k = 0; k < means.size(); ++k) {
      double d = y - means[k];
      scratch[k] = log_mix_w[k % t_count] - d * d * inv_two_sigma_sq;
    }
    log_cond.resize(m);
    for (int i = 0; i < m; ++i) {
      const double* row = scratch.data() + std::size_t(i) * t_count;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < t_count; ++t) mx = std::max(mx, row[t]);
      if (!std::isfinite(mx)) {
        log_cond[i] = mx;
        continue;
      }
      double s = 0.0;
      for (std::size_t t = 0; t < t_count; ++t) s += std::exp(row[t] - mx);
      log_cond[i] = mx + std::log(s);
    }
  }
};

inline double log_marginal(const std::vector<double>& log_cond, const Pmf& p) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) mx = std::max(mx, std::log(p[i]) + log_cond[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += std::exp(std::log(p[i]) + log_cond[i] - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// W(i, delta_j, p_hat, a*): the conditional-entropy integrand of index i,
///   integral f(y|s_i) * log2( f(y) / (f(y|s_i) p_i) ) dy,
/// for all i at once. Indices with p_hat[i] = 0 use the configured floor
/// inside the log denominator unless strict mode is requested.
inline std::vector<double> w_vector(double delta_j, const Pmf& p_hat, double sigma,
                                    const InterferenceProfile& intf,
                                    const QuadratureSpec& quad,
                                    double coeff_j = 1.0, bool strict = false) {
  if (!(delta_j > 0.0)) throw domain_error("w_vector: delta must be > 0");
  if (!(sigma > 0.0)) throw domain_error("w_vector: sigma must be > 0");
  require_pmf(p_hat, "w_vector");
  const int m = static_cast<int>(p_hat.size());
  if (strict)
    for (double x : p_hat)
      if (x == 0.0)
        throw domain_error("w_vector: zero-probability index in strict mode");

  InterferenceMixture mix = expand_interference(intf);
  detail::DensityLattice lat(m, delta_j, sigma, mix, coeff_j);
  const double sq2sigma = std::numbers::sqrt2 * sigma;
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);

  std::vector<double> scratch(lat.means.size()), log_cond;
  std::vector<double> w(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const double log_pi =
        std::log(p_hat[i] > 0.0 ? p_hat[i] : kLogFloor);
    double acc_i = 0.0;
    for (std::size_t t = 0; t < lat.t_count; ++t) {
      const double mean = lat.means[std::size_t(i) * lat.t_count + t];
      double acc_t = 0.0;
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const double y = mean + sq2sigma * quad.nodes[q];
        lat.log_cond_all(y, scratch, log_cond);
        const double log_f = detail::log_marginal(log_cond, p_hat);
        acc_t += quad.weights[q] * (log_f - log_cond[i] - log_pi);
      }
      acc_i += lat.mix_w[t] * acc_t;
    }
    w[i] = inv_sqrt_pi * acc_i / kLn2;
  }
  return w;
}

inline double w_integral(int index_i, double delta_j, const Pmf& p_hat, double sigma,
                         const InterferenceProfile& intf, const QuadratureSpec& quad,
                         double coeff_j = 1.0, bool strict = false) {
  if (index_i < 1 || index_i > static_cast<int>(p_hat.size()))
    throw domain_error("w_integral: index out of range");
  return w_vector(delta_j, p_hat, sigma, intf, quad, coeff_j, strict)[index_i - 1];
}

/// R_j(delta_j, p_j, a) = I(X_j; Yhat_j) in bits. The conditional entropy
/// is integrated as the posterior entropy against the marginal mixture,
/// one Gauss-Hermite pass per mixture component.
inline double mutual_information(double delta_j, const Pmf& p_j, double sigma,
                                 const InterferenceProfile& intf,
                                 const QuadratureSpec& quad, double coeff_j = 1.0) {
  if (!(delta_j > 0.0)) throw domain_error("mutual_information: delta must be > 0");
  if (!(sigma > 0.0)) throw domain_error("mutual_information: sigma must be > 0");
  require_pmf(p_j, "mutual_information");
  const int m = static_cast<int>(p_j.size());

  InterferenceMixture mix = expand_interference(intf);
  detail::DensityLattice lat(m, delta_j, sigma, mix, coeff_j);
  const double sq2sigma = std::numbers::sqrt2 * sigma;
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);

  std::vector<double> scratch(lat.means.size()), log_cond;
  double h_cond = 0.0;  // H(X|Yhat) in nats, accumulated
  for (int i = 0; i < m; ++i) {
    if (p_j[i] == 0.0) continue;
    for (std::size_t t = 0; t < lat.t_count; ++t) {
      const double mean = lat.means[std::size_t(i) * lat.t_count + t];
      double acc = 0.0;
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const double y = mean + sq2sigma * quad.nodes[q];
        lat.log_cond_all(y, scratch, log_cond);
        const double log_f = detail::log_marginal(log_cond, p_j);
        double ent = 0.0;  // -sum_i' P(i'|y) ln P(i'|y)
        for (int ip = 0; ip < m; ++ip) {
          if (p_j[ip] == 0.0) continue;
          double lp = std::log(p_j[ip]) + log_cond[ip] - log_f;
          ent -= std::exp(lp) * lp;
        }
        if (!std::isfinite(ent))
          throw convergence_error("mutual_information: non-finite integrand");
        acc += quad.weights[q] * ent;
      }
      h_cond += p_j[i] * lat.mix_w[t] * inv_sqrt_pi * acc;
    }
  }
  double mi = entropy_bits(p_j) - h_cond / kLn2;
  return std::max(0.0, mi);
}

/// Achievable rate of the sparse-dense codeword: the R_FEC-weighted
/// combination of shaped-PMF and uniform-PMF mutual information.
inline double sdt_rate(double delta_j, const Pmf& p_j, const CodingConfig& cfg,
                       double sigma, const InterferenceProfile& intf,
                       const QuadratureSpec& quad, double coeff_j = 1.0) {
  cfg.validate();
  double r_shaped = mutual_information(delta_j, p_j, sigma, intf, quad, coeff_j);
  if (cfg.r_fec == 1.0) return r_shaped;
  Pmf u = uniform_pmf(static_cast<int>(p_j.size()));
  double r_uniform = mutual_information(delta_j, u, sigma, intf, quad, coeff_j);
  return cfg.r_fec * r_shaped + (1.0 - cfg.r_fec) * r_uniform;
}

/// T_j = R_FEC * H(p_j), bits per channel use.
inline double transmission_rate(const Pmf& p_j, double r_fec) {
  require_pmf(p_j, "transmission_rate");
  return r_fec * entropy_bits(p_j);
}

/// Average optical power of the sparse-dense frame,
/// R_FEC * delta * sum_i i*p_i + (1-R_FEC) * delta * (M+1)/2.
inline double average_power(double delta_j, const Pmf& p_j, double r_fec) {
  require_pmf(p_j, "average_power");
  const double m = static_cast<double>(p_j.size());
  return r_fec * delta_j * mean_index(p_j) +
         (1.0 - r_fec) * delta_j * (m + 1.0) / 2.0;
}

}  // namespace psnoma
