#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "psnoma/rate.hpp"

namespace psnoma {

/// Spacing range implied by the power equality for a given code rate:
/// the mean constellation index must stay inside [1, M].
struct SpacingBounds {
  double delta_min;
  double delta_max;

  static SpacingBounds from_power(double p_rj, double r_fec, int m) {
    if (!(p_rj > 0.0)) throw domain_error("spacing bounds: P_rj must be > 0");
    CodingConfig{r_fec, 0.0}.validate();
    const double mid = (1.0 - r_fec) * (m + 1.0) / 2.0;
    SpacingBounds b{p_rj / (r_fec * m + mid), p_rj / (r_fec + mid)};
    if (!(b.delta_min > 0.0 && b.delta_min <= b.delta_max))
      throw domain_error("spacing bounds: degenerate range");
    return b;
  }
};

struct SolverConfig {
  double gamma_s = 1e-8;         // fixed-point stop on ||p_hat - p*||^2
  double golden_rel_tol = 1e-4;  // spacing tolerance, relative to the range
  double root_tol = 1e-12;       // residual tolerance for the multiplier solves
  int max_pmf_iters = 5000;
  int max_outer_rounds = 50;
  double outer_tol = 1e-6;  // bpcu improvement threshold between rounds
  std::vector<double> fec_rates = {1.0 / 3, 2.0 / 5, 1.0 / 2, 3.0 / 5, 2.0 / 3,
                                   3.0 / 4, 4.0 / 5, 5.0 / 6, 8.0 / 9, 9.0 / 10};
  double r_bf = 0.05;
  int quad_nodes = 64;
  int prescan_points = 9;

  void validate() const {
    if (!(gamma_s > 0) || !(golden_rel_tol > 0) || !(root_tol > 0) ||
        max_pmf_iters < 1 || max_outer_rounds < 1)
      throw domain_error("solver config: tolerances must be positive");
  }
};

/// Everything the per-user optimization needs to know about the link.
struct UserChannel {
  int m;        // constellation order
  double p_r;   // target received power P_rj
  double sigma;
  double coeff = 1.0;  // h_j * alpha_j
  InterferenceProfile intf;

  static UserChannel from_scenario(const NomaScenario& scn, int user_j,
                                   InterferenceProfile intf) {
    return {scn.mod_order(), scn.received_power(user_j), scn.sigma(),
            scn.gain(user_j) * scn.alpha(user_j), std::move(intf)};
  }
};

struct OptimizationResult {
  int user = 0;
  double osnr_db = 0.0;
  double r_fec = 1.0;
  double delta = 0.0;
  Pmf pmf;
  double t_rate = 0.0;  // T_j (or C_j for the capacity scheme)
  double r_sdt = 0.0;
  int iters_pmf = 0;    // fixed-point iterations of the final inner solve
  int iters_delta = 0;  // spacing-search objective evaluations
  bool rate_constraint_active = false;
  bool feasible = false;
};

namespace detail {

/// p_b proportional to 2^{-theta*omega_b - tilt_b}, with theta chosen so
/// that sum_b omega_b p_b = mu_star. The weighted mean is strictly
/// decreasing in theta, so a sign-change bracket plus bisection suffices.
struct TiltedFamily {
  double theta = 0.0;
  Pmf pmf;
};

inline Pmf tilted_pmf(const std::vector<double>& omega,
                      const std::vector<double>& tilt, double theta) {
  const std::size_t n = omega.size();
  Pmf p(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < n; ++b) {
    p[b] = -theta * omega[b] - tilt[b];
    mx = std::max(mx, p[b]);
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    p[b] = std::exp2(p[b] - mx);
    sum += p[b];
  }
  for (double& x : p) x /= sum;
  return p;
}

inline double weighted_mean(const std::vector<double>& omega, const Pmf& p) {
  double s = 0.0;
  for (std::size_t b = 0; b < omega.size(); ++b) s += omega[b] * p[b];
  return s;
}

inline TiltedFamily solve_tilted(const std::vector<double>& omega,
                                 const std::vector<double>& tilt, double mu_star,
                                 double tol) {
  const std::size_t n = omega.size();
  const double omega_lo = *std::min_element(omega.begin(), omega.end());
  const double omega_hi = *std::max_element(omega.begin(), omega.end());
  if (mu_star < omega_lo - 1e-9 || mu_star > omega_hi + 1e-9)
    throw infeasible_error("tilted family: target mean outside support");

  auto family = [&](double theta) { return tilted_pmf(omega, tilt, theta); };
  auto residual = [&](double theta) {
    return weighted_mean(omega, family(theta)) - mu_star;
  };

  // Degenerate targets collapse to a point mass at the extreme index.
  if (mu_star <= omega_lo + 1e-12 * (omega_hi - omega_lo)) {
    Pmf p(n, 0.0);
    p[std::min_element(omega.begin(), omega.end()) - omega.begin()] = 1.0;
    return {std::numeric_limits<double>::infinity(), std::move(p)};
  }
  if (mu_star >= omega_hi - 1e-12 * (omega_hi - omega_lo)) {
    Pmf p(n, 0.0);
    p[std::max_element(omega.begin(), omega.end()) - omega.begin()] = 1.0;
    return {-std::numeric_limits<double>::infinity(), std::move(p)};
  }

  // A bracket of half-width ~ tilt spread always straddles the root:
  // beyond it the omega term dominates any tilt difference.
  double spread = 0.0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = b + 1; c < n; ++c)
      spread = std::max(spread, std::abs(tilt[b] - tilt[c]) /
                                    std::max(1e-12, std::abs(omega[b] - omega[c])));
  double lo = -(1.0 + spread), hi = 1.0 + spread;
  double r_lo = residual(lo), r_hi = residual(hi);
  for (int k = 0; k < 80 && r_lo < 0.0; ++k) {
    lo *= 2.0;
    r_lo = residual(lo);
  }
  for (int k = 0; k < 80 && r_hi > 0.0; ++k) {
    hi *= 2.0;
    r_hi = residual(hi);
  }
  if (r_lo < 0.0 || r_hi > 0.0)
    throw convergence_error("tilted family: failed to bracket theta");

  double mid = 0.0;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    double r = residual(mid);
    if (std::abs(r) < tol * std::max(1.0, omega_hi)) break;
    (r > 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  return {mid, family(mid)};
}

struct KktStep {
  Pmf pmf;
  double theta = 0.0;  // eta * delta
  double tau = 0.0;
  bool rate_active = false;
};

/// One application of the two-branch KKT solution on generalized power
/// coefficients omega (omega_b = b+1 for the plain problem, pair means
/// for the pairwise-constrained baseline).
inline KktStep kkt_step_general(const std::vector<double>& omega,
                                const std::vector<double>& w, double r_fec,
                                double d_const, double mu_star, double root_tol) {
  const std::size_t n = omega.size();
  std::vector<double> no_tilt(n, 0.0);

  auto rate_residual = [&](const Pmf& p) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) s += p[b] * (r_fec * w[b] - d_const);
    return s;
  };

  TiltedFamily b1 = solve_tilted(omega, no_tilt, mu_star, root_tol);
  const double cr1 = rate_residual(b1.pmf);
  if (cr1 < -1e-9) return {std::move(b1.pmf), b1.theta, 0.0, false};

  // Rate constraint active: joint solve with the tau-tilted family.
  auto step_at = [&](double tau) {
    std::vector<double> tilt(n);
    for (std::size_t b = 0; b < n; ++b) tilt[b] = tau * w[b];
    return solve_tilted(omega, tilt, mu_star, root_tol);
  };

  double tau_hi = 1.0;
  TiltedFamily fam_hi = step_at(tau_hi);
  double g_hi = rate_residual(fam_hi.pmf);
  while (g_hi > 0.0 && tau_hi < 1e9) {
    tau_hi *= 8.0;
    fam_hi = step_at(tau_hi);
    g_hi = rate_residual(fam_hi.pmf);
  }
  if (g_hi > 0.0) {
    if (cr1 <= 1e-9)  // boundary tie: the slack branch is the solution
      return {std::move(b1.pmf), b1.theta, 0.0, false};
    throw infeasible_error("kkt: rate constraint admits no multiplier root");
  }

  double tau_lo = 0.0;
  double tau = tau_hi;
  TiltedFamily fam = fam_hi;
  for (int it = 0; it < 200; ++it) {
    tau = 0.5 * (tau_lo + tau_hi);
    fam = step_at(tau);
    double g = rate_residual(fam.pmf);
    if (std::abs(g) < root_tol) break;
    (g > 0.0 ? tau_lo : tau_hi) = tau;
    if (tau_hi - tau_lo < 1e-15 * std::max(1.0, tau)) break;
  }
  return {std::move(fam.pmf), fam.theta, tau, true};
}

/// Probabilities below the clamp threshold become exact zeros; theta is
/// re-solved on the surviving support so the power equality still holds.
inline Pmf clamp_and_restore(const Pmf& p, const std::vector<double>& omega,
                             const std::vector<double>& tilt, double mu_star,
                             double root_tol, double clamp = 1e-12) {
  std::vector<std::size_t> support;
  for (std::size_t b = 0; b < p.size(); ++b)
    if (p[b] >= clamp) support.push_back(b);
  if (support.size() == p.size() || support.empty()) return p;

  std::vector<double> omega_s, tilt_s;
  for (std::size_t b : support) {
    omega_s.push_back(omega[b]);
    tilt_s.push_back(tilt[b]);
  }
  double lo = *std::min_element(omega_s.begin(), omega_s.end());
  double hi = *std::max_element(omega_s.begin(), omega_s.end());
  if (mu_star < lo || mu_star > hi) return p;  // support cannot carry the mean

  try {
    TiltedFamily f = solve_tilted(omega_s, tilt_s, mu_star, root_tol);
    Pmf out(p.size(), 0.0);
    for (std::size_t b = 0; b < support.size(); ++b) out[support[b]] = f.pmf[b];
    return out;
  } catch (const std::exception&) {
    return p;
  }
}

inline std::vector<double> index_omega(int m) {
  std::vector<double> omega(m);
  for (int i = 0; i < m; ++i) omega[i] = i + 1.0;
  return omega;
}

/// Mass on the first and last support points only, mean pinned to the
/// power target; the optimal low-OSNR PMFs have exactly this shape.
inline Pmf extreme_pmf(const std::vector<double>& omega, double mu_star) {
  Pmf p(omega.size(), 0.0);
  double f = (omega.back() - mu_star) / (omega.back() - omega.front());
  p.front() = std::min(1.0, std::max(0.0, f));
  p.back() = 1.0 - p.front();
  return p;
}

}  // namespace detail

/// Target mean index implied by the sparse-dense power equality.
inline double target_mean_index(double delta, double r_fec, double p_rj, int m) {
  const double p_j = p_rj - (1.0 - r_fec) * delta * (m + 1.0) / 2.0;
  return p_j / (r_fec * delta);
}

/// One Lemma application: given the reference PMF p_hat, returns the
/// KKT-optimal PMF for fixed (delta, R_FEC). Throws infeasible_error if
/// neither branch admits a solution at this spacing/rate pair.
inline Pmf kkt_pmf(double delta, double r_fec, const Pmf& p_hat,
                   const UserChannel& ch, double r_bf, const QuadratureSpec& quad,
                   double root_tol = 1e-12) {
  require_pmf(p_hat, "kkt_pmf");
  const int m = ch.m;
  const double mu_star = target_mean_index(delta, r_fec, ch.p_r, m);
  std::vector<double> w =
      w_vector(delta, p_hat, ch.sigma, ch.intf, quad, ch.coeff);
  const double r_u = mutual_information(delta, uniform_pmf(m), ch.sigma, ch.intf,
                                        quad, ch.coeff);
  const double d_const = (1.0 - r_fec) * r_u - r_bf;
  detail::KktStep step = detail::kkt_step_general(detail::index_omega(m), w,
                                                  r_fec, d_const, mu_star, root_tol);
  return step.pmf;
}

struct Algorithm1Result {
  Pmf pmf;
  int iterations = 0;
  double tau = 0.0;
  bool rate_active = false;
  double t_rate = 0.0;
};

/// Fixed point of the Lemma map: recompute the W vector at the current
/// reference PMF, apply the KKT step, repeat until the iterate distance
/// drops below gamma_s.
inline Algorithm1Result algorithm1(double delta, double r_fec, const UserChannel& ch,
                                   double r_bf, const QuadratureSpec& quad,
                                   const SolverConfig& cfg,
                                   const Pmf* warm_start = nullptr) {
  const int m = ch.m;
  const double mu_star = target_mean_index(delta, r_fec, ch.p_r, m);
  const std::vector<double> omega = detail::index_omega(m);
  if (mu_star < omega.front() - 1e-9 || mu_star > omega.back() + 1e-9)
    throw infeasible_error("algorithm1: spacing violates the power equality range");

  const double r_u = mutual_information(delta, uniform_pmf(m), ch.sigma, ch.intf,
                                        quad, ch.coeff);
  const double d_const = (1.0 - r_fec) * r_u - r_bf;

  // The reference PMF must itself satisfy the rate constraint, or the
  // convexified subproblem can be infeasible even when the original one
  // is not. Blending the max-entropy geometric start toward the
  // two-extreme-mass PMF on the power plane always crosses the feasible
  // set if it is nonempty in either basin.
  auto rate_feasible = [&](const Pmf& p) {
    double mi = mutual_information(delta, p, ch.sigma, ch.intf, quad, ch.coeff);
    return transmission_rate(p, r_fec) <=
           r_fec * mi + (1.0 - r_fec) * r_u - r_bf + 1e-12;
  };
  std::vector<double> zero_tilt(m, 0.0);
  const Pmf geo = detail::solve_tilted(omega, zero_tilt, mu_star, cfg.root_tol).pmf;
  const Pmf extreme = detail::extreme_pmf(omega, mu_star);

  auto run_fixed_point = [&](Pmf p_hat) {
    Algorithm1Result res;
    detail::KktStep step;
    std::vector<double> w;
    int it = 0;
    for (; it < cfg.max_pmf_iters; ++it) {
      w = w_vector(delta, p_hat, ch.sigma, ch.intf, quad, ch.coeff);
      step = detail::kkt_step_general(omega, w, r_fec, d_const, mu_star,
                                      cfg.root_tol);
      double eps = sq_distance(p_hat, step.pmf);
      p_hat = step.pmf;
      if (eps < cfg.gamma_s) break;
    }
    if (it == cfg.max_pmf_iters)
      throw convergence_error("algorithm1: fixed point did not converge");
    std::vector<double> tilt(m);
    for (int i = 0; i < m; ++i) tilt[i] = step.tau * w[i];
    res.pmf = detail::clamp_and_restore(p_hat, omega, tilt, mu_star, cfg.root_tol);
    res.iterations = it + 1;
    res.tau = step.tau;
    res.rate_active = step.rate_active;
    res.t_rate = transmission_rate(res.pmf, r_fec);
    return res;
  };

  std::vector<Pmf> starts;
  if (warm_start && rate_feasible(*warm_start)) starts.push_back(*warm_start);
  if (starts.empty()) {
    for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      Pmf mix(m);
      for (int i = 0; i < m; ++i)
        mix[i] = (1.0 - s) * geo[i] + s * extreme[i];
      if (rate_feasible(mix)) {
        starts.push_back(std::move(mix));
        break;
      }
    }
  }
  // The problem is non-convex in p: the mass-at-extremes basin can beat
  // the smooth one, so always probe it as well.
  if (rate_feasible(extreme) &&
      (starts.empty() || sq_distance(starts.front(), extreme) > 1e-12))
    starts.push_back(extreme);
  if (starts.empty())
    throw infeasible_error("algorithm1: no feasible starting point");

  Algorithm1Result best;
  bool have = false;
  for (const Pmf& s : starts) {
    try {
      Algorithm1Result r = run_fixed_point(s);
      if (!have || r.t_rate > best.t_rate) {
        best = std::move(r);
        have = true;
      }
    } catch (const infeasible_error&) {
    }
  }
  if (!have)
    throw infeasible_error("algorithm1: all starting points collapsed");
  return best;
}

struct GoldenResult {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Golden-section maximization over [lo, hi]; also evaluates both
/// endpoints and returns the best point seen. Degenerate brackets
/// return lo.
inline GoldenResult golden_section_max(const std::function<double(double)>& f,
                                       double lo, double hi, double rel_tol,
                                       int max_iters = 200) {
  GoldenResult best;
  if (!(hi > lo)) {
    best.x = lo;
    best.value = f(lo);
    best.evaluations = 1;
    return best;
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double span = hi - lo;
  auto consider = [&](double x, double v) {
    if (v > best.value) {
      best.x = x;
      best.value = v;
    }
  };
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  int evals = 2;
  consider(c, fc);
  consider(d, fd);
  for (int it = 0; it < max_iters && (b - a) > rel_tol * span; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
    ++evals;
  }
  consider(lo, f(lo));
  consider(hi, f(hi));
  evals += 2;
  best.evaluations = evals;
  return best;
}

/// Spacing search at a fixed PMF: maximizes R^SDT(delta, p) over the
/// bounds. Kept as the generic building block named by the alternation.
inline GoldenResult golden_section_delta(const Pmf& p_j, double r_fec,
                                         const SpacingBounds& bounds,
                                         const UserChannel& ch,
                                         const QuadratureSpec& quad, double rel_tol) {
  CodingConfig cfg{r_fec, 0.0};
  auto f = [&](double delta) {
    return sdt_rate(delta, p_j, cfg, ch.sigma, ch.intf, quad, ch.coeff);
  };
  return golden_section_max(f, bounds.delta_min, bounds.delta_max, rel_tol);
}

namespace detail {

struct InnerEval {
  bool feasible = false;
  Algorithm1Result alg;
};

/// Inner solve at one spacing; infeasible (delta, R_FEC) pairs are
/// reported rather than thrown so the spacing search can step over them.
inline InnerEval eval_delta(double delta, double r_fec, const UserChannel& ch,
                            const QuadratureSpec& quad, const SolverConfig& cfg,
                            const Pmf* warm) {
  InnerEval ev;
  try {
    ev.alg = algorithm1(delta, r_fec, ch, cfg.r_bf, quad, cfg, warm);
    ev.feasible = true;
  } catch (const infeasible_error&) {
  } catch (const convergence_error&) {
  }
  return ev;
}

}  // namespace detail

/// Joint (delta, p) optimization for one user at a fixed code rate:
/// a bracketing prescan plus golden-section over the spacing, with the
/// fixed-point PMF solve nested inside each spacing evaluation, repeated
/// until the transmission rate stops improving.
inline OptimizationResult optimize_user(const UserChannel& ch, double r_fec,
                                        const SolverConfig& cfg,
                                        const QuadratureSpec& quad) {
  cfg.validate();
  SpacingBounds bounds = SpacingBounds::from_power(ch.p_r, r_fec, ch.m);

  OptimizationResult result;
  result.r_fec = r_fec;

  Pmf warm;
  bool have_warm = false;
  int total_evals = 0;
  double best_t = -1.0;

  for (int round = 0; round < cfg.max_outer_rounds; ++round) {
    const double prev_best = best_t;

    // Spacing objective: transmission rate of the inner fixed point.
    detail::InnerEval best_inner;
    double best_inner_delta = bounds.delta_min;
    auto objective = [&](double delta) {
      detail::InnerEval ev = detail::eval_delta(delta, r_fec, ch, quad, cfg,
                                                have_warm ? &warm : nullptr);
      ++total_evals;
      if (!ev.feasible) return -std::numeric_limits<double>::infinity();
      if (!best_inner.feasible || ev.alg.t_rate > best_inner.alg.t_rate) {
        best_inner = ev;
        best_inner_delta = delta;
      }
      return ev.alg.t_rate;
    };

    // Coarse bracket first: the nested objective can have infeasible
    // shoulders, which plain golden section does not tolerate.
    const int k = std::max(3, cfg.prescan_points);
    std::vector<double> grid(k);
    int arg = -1;
    double arg_val = 0.0;
    for (int i = 0; i < k; ++i) {
      grid[i] = bounds.delta_min +
                (bounds.delta_max - bounds.delta_min) * i / double(k - 1);
      double v = objective(grid[i]);
      if (arg < 0 || v > arg_val) {
        arg = i;
        arg_val = v;
      }
    }
    if (!best_inner.feasible) break;  // no feasible spacing at this rate

    double lo = grid[std::max(0, arg - 1)];
    double hi = grid[std::min(k - 1, arg + 1)];
    golden_section_max(objective, lo, hi, cfg.golden_rel_tol);

    double t = best_inner.alg.t_rate;
    if (t > best_t + 1e-12) {
      best_t = t;
      result.delta = best_inner_delta;
      result.pmf = best_inner.alg.pmf;
      result.t_rate = t;
      result.iters_pmf = best_inner.alg.iterations;
      result.rate_constraint_active = best_inner.alg.rate_active;
      result.feasible = true;
      warm = result.pmf;
      have_warm = true;
    }
    if (!result.feasible) break;
    if (round > 0 && best_t - prev_best < cfg.outer_tol) break;
  }

  result.iters_delta = total_evals;
  if (result.feasible) {
    result.r_sdt = sdt_rate(result.delta, result.pmf, CodingConfig{r_fec, 0.0},
                            ch.sigma, ch.intf, quad, ch.coeff);
  }
  return result;
}

enum class Scheme { proposed, uniform, pcm, capacity };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::proposed: return "proposed";
    case Scheme::uniform: return "uniform";
    case Scheme::pcm: return "pcm";
    case Scheme::capacity: return "capacity";
  }
  return "?";
}

/// Uniform-distribution baseline: fixed uniform PMF, spacing pinned by
/// the power equality, highest feasible code rate from the set.
inline OptimizationResult uniform_baseline_user(const UserChannel& ch,
                                                const SolverConfig& cfg,
                                                const QuadratureSpec& quad) {
  OptimizationResult res;
  const int m = ch.m;
  res.delta = 2.0 * ch.p_r / (m + 1.0);
  res.pmf = uniform_pmf(m);
  double mi = mutual_information(res.delta, res.pmf, ch.sigma, ch.intf, quad,
                                 ch.coeff);
  res.r_sdt = mi;
  std::vector<double> rates = cfg.fec_rates;
  std::sort(rates.begin(), rates.end());
  for (auto r = rates.rbegin(); r != rates.rend(); ++r) {
    if (*r * std::log2(double(m)) <= mi - cfg.r_bf + 1e-12) {
      res.r_fec = *r;
      res.t_rate = *r * std::log2(double(m));
      res.feasible = true;
      break;
    }
  }
  return res;
}

namespace detail {

/// Pairwise-constrained fixed point: consecutive symbols share one
/// probability, so the KKT machinery runs on M/2 pair weights with pair
/// power means and pair-averaged W values.
inline InnerEval eval_delta_pcm(double delta, double r_fec, const UserChannel& ch,
                                const QuadratureSpec& quad, const SolverConfig& cfg,
                                const Pmf* warm) {
  InnerEval ev;
  const int m = ch.m;
  const int pairs = m / 2;
  std::vector<double> omega(pairs);
  for (int k = 0; k < pairs; ++k) omega[k] = 2.0 * k + 1.5;
  const double mu_star = target_mean_index(delta, r_fec, ch.p_r, m);
  if (mu_star < omega.front() - 1e-9 || mu_star > omega.back() + 1e-9) return ev;

  try {
    const double r_u = mutual_information(delta, uniform_pmf(m), ch.sigma,
                                          ch.intf, quad, ch.coeff);
    const double d_const = (1.0 - r_fec) * r_u - cfg.r_bf;
    auto expand = [&](const Pmf& pi) {
      Pmf p(m);
      for (int k = 0; k < pairs; ++k) p[2 * k] = p[2 * k + 1] = pi[k] / 2.0;
      return p;
    };
    auto rate_feasible = [&](const Pmf& p) {
      double mi = mutual_information(delta, p, ch.sigma, ch.intf, quad, ch.coeff);
      return transmission_rate(p, r_fec) <=
             r_fec * mi + (1.0 - r_fec) * r_u - cfg.r_bf + 1e-12;
    };
    std::vector<double> zero_tilt(pairs, 0.0);
    const Pmf geo = expand(solve_tilted(omega, zero_tilt, mu_star, cfg.root_tol).pmf);
    const Pmf extreme = expand(extreme_pmf(omega, mu_star));

    auto run_fixed_point = [&](Pmf p_hat) {
      Algorithm1Result res;
      KktStep step;
      std::vector<double> w_pair(pairs);
      int it = 0;
      for (; it < cfg.max_pmf_iters; ++it) {
        std::vector<double> w =
            w_vector(delta, p_hat, ch.sigma, ch.intf, quad, ch.coeff);
        for (int k = 0; k < pairs; ++k)
          w_pair[k] = 0.5 * (w[2 * k] + w[2 * k + 1]);
        step = kkt_step_general(omega, w_pair, r_fec, d_const, mu_star,
                                cfg.root_tol);
        Pmf p_new(m);
        for (int k = 0; k < pairs; ++k)
          p_new[2 * k] = p_new[2 * k + 1] = step.pmf[k] / 2.0;
        double eps = sq_distance(p_hat, p_new);
        p_hat = std::move(p_new);
        if (eps < cfg.gamma_s) break;
      }
      if (it == cfg.max_pmf_iters)
        throw convergence_error("pcm: fixed point did not converge");
      std::vector<double> tilt(pairs);
      for (int k = 0; k < pairs; ++k) tilt[k] = step.tau * w_pair[k];
      Pmf pi(pairs);
      for (int k = 0; k < pairs; ++k) pi[k] = 2.0 * p_hat[2 * k];
      pi = clamp_and_restore(pi, omega, tilt, mu_star, cfg.root_tol);
      for (int k = 0; k < pairs; ++k) p_hat[2 * k] = p_hat[2 * k + 1] = pi[k] / 2.0;
      res.pmf = p_hat;
      res.iterations = it + 1;
      res.tau = step.tau;
      res.rate_active = step.rate_active;
      res.t_rate = transmission_rate(p_hat, r_fec);
      return res;
    };

    std::vector<Pmf> starts;
    if (warm && rate_feasible(*warm)) starts.push_back(*warm);
    if (starts.empty()) {
      for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        Pmf mix(m);
        for (int i = 0; i < m; ++i) mix[i] = (1 - s) * geo[i] + s * extreme[i];
        if (rate_feasible(mix)) {
          starts.push_back(std::move(mix));
          break;
        }
      }
    }
    if (rate_feasible(extreme) &&
        (starts.empty() || sq_distance(starts.front(), extreme) > 1e-12))
      starts.push_back(extreme);

    for (const Pmf& s : starts) {
      try {
        Algorithm1Result r = run_fixed_point(s);
        if (!ev.feasible || r.t_rate > ev.alg.t_rate) {
          ev.alg = std::move(r);
          ev.feasible = true;
        }
      } catch (const infeasible_error&) {
      } catch (const convergence_error&) {
      }
    }
  } catch (const infeasible_error&) {
  } catch (const convergence_error&) {
  }
  return ev;
}

}  // namespace detail

/// Pairwise-coded-modulation baseline: same alternation as the main
/// optimizer with the PMF constrained to equal masses on consecutive
/// symbol pairs.
inline OptimizationResult pcm_baseline_user(const UserChannel& ch, double r_fec,
                                            const SolverConfig& cfg,
                                            const QuadratureSpec& quad) {
  if (ch.m % 2 != 0) throw domain_error("pcm: M must be even");
  const int m = ch.m;
  const double mid = (1.0 - r_fec) * (m + 1.0) / 2.0;
  // Pair means live in [1.5, M-0.5]; the spacing range shrinks to match.
  SpacingBounds bounds{ch.p_r / (r_fec * (m - 0.5) + mid),
                       ch.p_r / (r_fec * 1.5 + mid)};

  OptimizationResult result;
  result.r_fec = r_fec;
  Pmf warm;
  bool have_warm = false;
  int total_evals = 0;
  double best_t = -1.0;

  for (int round = 0; round < cfg.max_outer_rounds; ++round) {
    const double prev_best = best_t;
    detail::InnerEval best_inner;
    double best_inner_delta = bounds.delta_min;
    auto objective = [&](double delta) {
      detail::InnerEval ev = detail::eval_delta_pcm(delta, r_fec, ch, quad, cfg,
                                                    have_warm ? &warm : nullptr);
      ++total_evals;
      if (!ev.feasible) return -std::numeric_limits<double>::infinity();
      if (!best_inner.feasible || ev.alg.t_rate > best_inner.alg.t_rate) {
        best_inner = ev;
        best_inner_delta = delta;
      }
      return ev.alg.t_rate;
    };
    const int k = std::max(3, cfg.prescan_points);
    int arg = -1;
    double arg_val = 0.0;
    std::vector<double> grid(k);
    for (int i = 0; i < k; ++i) {
      grid[i] = bounds.delta_min +
                (bounds.delta_max - bounds.delta_min) * i / double(k - 1);
      double v = objective(grid[i]);
      if (arg < 0 || v > arg_val) {
        arg = i;
        arg_val = v;
      }
    }
    if (!best_inner.feasible) break;
    golden_section_max(objective, grid[std::max(0, arg - 1)],
                       grid[std::min(k - 1, arg + 1)], cfg.golden_rel_tol);

    double t = best_inner.alg.t_rate;
    if (t > best_t + 1e-12) {
      best_t = t;
      result.delta = best_inner_delta;
      result.pmf = best_inner.alg.pmf;
      result.t_rate = t;
      result.iters_pmf = best_inner.alg.iterations;
      result.rate_constraint_active = best_inner.alg.rate_active;
      result.feasible = true;
      warm = result.pmf;
      have_warm = true;
    }
    if (!result.feasible) break;
    if (round > 0 && best_t - prev_best < cfg.outer_tol) break;
  }
  result.iters_delta = total_evals;
  if (result.feasible)
    result.r_sdt = sdt_rate(result.delta, result.pmf, CodingConfig{r_fec, 0.0},
                            ch.sigma, ch.intf, quad, ch.coeff);
  return result;
}

namespace detail {

/// Capacity fixed point at fixed spacing: surrogate update with the rate
/// constraint removed and the plain power equality s^T p = P_rj. The
/// update p_i proportional to 2^{-W_i(p_hat) - theta*i} is iterated until
/// the iterate distance or the MI improvement stalls.
struct BaResult {
  Pmf pmf;
  double mi = 0.0;
  int iterations = 0;
};

inline BaResult ba_fixed_point(double delta, const UserChannel& ch,
                               const QuadratureSpec& quad, const SolverConfig& cfg,
                               const Pmf* warm) {
  const int m = ch.m;
  const std::vector<double> omega = index_omega(m);
  const double mu_star = ch.p_r / delta;
  if (mu_star < 1.0 - 1e-9 || mu_star > m + 1e-9)
    throw infeasible_error("capacity: spacing violates the power equality");

  std::vector<double> zero_tilt(m, 0.0);
  Pmf p_hat = warm ? *warm
                   : solve_tilted(omega, zero_tilt, mu_star, cfg.root_tol).pmf;
  double mi_prev = -1.0;
  int it = 0;
  for (; it < cfg.max_pmf_iters; ++it) {
    std::vector<double> w =
        w_vector(delta, p_hat, ch.sigma, ch.intf, quad, ch.coeff);
    TiltedFamily fam = solve_tilted(omega, w, mu_star, cfg.root_tol);
    double eps = sq_distance(p_hat, fam.pmf);
    p_hat = std::move(fam.pmf);
    if (eps < cfg.gamma_s) break;
    if (it >= 20 && it % 10 == 0) {
      double mi = mutual_information(delta, p_hat, ch.sigma, ch.intf, quad,
                                     ch.coeff);
      if (mi_prev >= 0.0 && mi - mi_prev < 1e-11) break;
      mi_prev = mi;
    }
  }
  BaResult res;
  res.pmf = clamp_and_restore(p_hat, omega,
                              w_vector(delta, p_hat, ch.sigma, ch.intf, quad,
                                       ch.coeff),
                              mu_star, cfg.root_tol);
  res.mi = mutual_information(delta, res.pmf, ch.sigma, ch.intf, quad, ch.coeff);
  res.iterations = it + 1;
  return res;
}

}  // namespace detail

/// Capacity of one user: maximize the mutual information over (delta, p)
/// subject to the equality power constraint, spacing in [P_rj/M, P_rj].
inline OptimizationResult capacity_user(const UserChannel& ch,
                                        const SolverConfig& cfg,
                                        const QuadratureSpec& quad) {
  OptimizationResult result;
  result.r_fec = 1.0;
  const double lo = ch.p_r / ch.m, hi = ch.p_r;

  Pmf warm;
  bool have_warm = false;
  int total_evals = 0;
  detail::BaResult best;
  double best_delta = lo;
  bool found = false;

  auto objective = [&](double delta) {
    ++total_evals;
    try {
      detail::BaResult r =
          detail::ba_fixed_point(delta, ch, quad, cfg, have_warm ? &warm : nullptr);
      if (!found || r.mi > best.mi) {
        best = r;
        best_delta = delta;
        found = true;
      }
      return r.mi;
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  const int k = std::max(3, cfg.prescan_points);
  std::vector<double> grid(k), val(k);
  int arg = -1;
  for (int i = 0; i < k; ++i) {
    grid[i] = lo + (hi - lo) * i / double(k - 1);
    val[i] = objective(grid[i]);
    if (arg < 0 || val[i] > val[arg]) arg = i;
  }
  if (found) {
    warm = best.pmf;
    have_warm = true;
    golden_section_max(objective, grid[std::max(0, arg - 1)],
                       grid[std::min(k - 1, arg + 1)], cfg.golden_rel_tol);
  }

  result.iters_delta = total_evals;
  if (found) {
    result.feasible = true;
    result.delta = best_delta;
    result.pmf = best.pmf;
    result.t_rate = best.mi;
    result.r_sdt = best.mi;
    result.iters_pmf = best.iterations;
  }
  return result;
}

/// Per-user optimum over the code-rate set: the feasible rate with the
/// highest transmission rate wins.
inline OptimizationResult optimize_user_over_rates(const UserChannel& ch,
                                                   const SolverConfig& cfg,
                                                   const QuadratureSpec& quad,
                                                   Scheme scheme) {
  if (scheme == Scheme::uniform) return uniform_baseline_user(ch, cfg, quad);
  if (scheme == Scheme::capacity) return capacity_user(ch, cfg, quad);

  OptimizationResult best;
  for (double r : cfg.fec_rates) {
    if (best.feasible && r * std::log2(double(ch.m)) <= best.t_rate) continue;
    OptimizationResult res = scheme == Scheme::pcm
                                 ? pcm_baseline_user(ch, r, cfg, quad)
                                 : optimize_user(ch, r, cfg, quad);
    if (res.feasible && (!best.feasible || res.t_rate > best.t_rate)) best = res;
  }
  return best;
}

/// Whole-scenario optimization in inverse SIC order (user N first); each
/// user's interference profile chains the already-optimized users.
inline std::vector<OptimizationResult> optimize_scenario(
    const NomaScenario& scn, const SolverConfig& cfg,
    Scheme scheme = Scheme::proposed) {
  cfg.validate();
  QuadratureSpec quad = QuadratureSpec::gauss_hermite(cfg.quad_nodes);
  const int n = scn.num_users();
  std::vector<OptimizationResult> results(n);
  InterferenceProfile chain;  // users j+1..N, nearest first

  for (int j = n; j >= 1; --j) {
    UserChannel ch = UserChannel::from_scenario(scn, j, chain);
    OptimizationResult res = optimize_user_over_rates(ch, cfg, quad, scheme);
    res.user = j;
    res.osnr_db = scn.sigma() > 0.0 ? scn.osnr_db() : 0.0;
    results[j - 1] = res;

    Interferer entry;
    entry.gain = scn.gain(j);
    entry.alpha = scn.alpha(j);
    if (res.feasible) {
      entry.delta = res.delta;
      entry.pmf = res.pmf;
    } else {
      // Power-correct placeholder: an infeasible user still transmits.
      entry.delta = 2.0 * scn.received_power(j) / (scn.mod_order() + 1.0);
      entry.pmf = uniform_pmf(scn.mod_order());
    }
    chain.entries.insert(chain.entries.begin(), entry);
  }
  return results;
}

/// Appendix-style NOMA capacities for every user, inverse SIC order.
inline std::vector<OptimizationResult> capacity_noma(const NomaScenario& scn,
                                                     const SolverConfig& cfg) {
  return optimize_scenario(scn, cfg, Scheme::capacity);
}

}  // namespace psnoma
