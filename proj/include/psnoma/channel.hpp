#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "psnoma/common.hpp"

namespace psnoma {

/// Line-of-sight geometry between one LED and the photodiode.
/// Angles in radians; detector area in m^2; distance in m.
struct ChannelGeometry {
  double distance = 1.0;         // d_j > 0
  double detector_area = 1e-4;   // A > 0
  double fov = std::numbers::pi / 2;  // Psi_c, field of view
  double arrival_angle = 0.0;    // psi_j
  double departure_angle = 0.0;  // phi_j
  double filter_gain = 1.0;      // T(psi_j)
  double concentrator_gain = 1.0;  // G(psi_j)
  double half_power_angle = std::numbers::pi / 3;  // Phi_1/2

  void validate() const {
    if (!(distance > 0.0)) throw domain_error("geometry: distance must be > 0");
    if (!(detector_area > 0.0)) throw domain_error("geometry: area must be > 0");
    if (!(fov > 0.0 && fov <= std::numbers::pi / 2))
      throw domain_error("geometry: fov must be in (0, pi/2]");
    if (!(half_power_angle > 0.0 && half_power_angle < std::numbers::pi / 2))
      throw domain_error("geometry: half-power angle must be in (0, pi/2)");
    if (filter_gain < 0.0 || concentrator_gain < 0.0)
      throw domain_error("geometry: filter/concentrator gains must be >= 0");
  }
};

/// Lambert mode number m = -ln 2 / ln(cos(half_power_angle)).
inline double lambert_mode(double half_power_angle) {
  double c = std::cos(half_power_angle);
  if (c <= 1e-12 || c >= 1.0)
    throw domain_error("lambert_mode: cos(half-power angle) must lie in (0,1)");
  return -std::log(2.0) / std::log(c);
}

/// LOS channel gain; zero beyond the field of view.
inline double lambertian_gain(const ChannelGeometry& g) {
  g.validate();
  if (g.arrival_angle > g.fov) return 0.0;
  double m = lambert_mode(g.half_power_angle);
  double base = (m + 1.0) * g.detector_area /
                (2.0 * std::numbers::pi * g.distance * g.distance);
  return base * std::pow(std::cos(g.departure_angle), m) * g.filter_gain *
         g.concentrator_gain * std::cos(g.arrival_angle);
}

/// Power back-off c (dB) that lets user 1 hit P_max with equality and
/// spaces consecutive users' received powers c dB apart.
inline double power_backoff_db(double p_max, double alpha1, double p_rN, int n_users) {
  if (n_users < 2) throw domain_error("power_backoff: need at least 2 users");
  if (!(p_max >= alpha1 * p_rN))
    throw infeasible_error("power_backoff: P_max < alpha_1 * P_rN");
  return 10.0 * std::log10(p_max / (alpha1 * p_rN)) / (n_users - 1);
}

/// P_rj = P_rN * 10^((N-j)c/10), j = 1..N (position 0 holds user 1).
inline std::vector<double> received_powers(double p_rN, double c_db, int n_users) {
  if (c_db < 0.0) throw domain_error("received_powers: back-off must be >= 0 dB");
  std::vector<double> pr(n_users);
  for (int j = 1; j <= n_users; ++j)
    pr[j - 1] = p_rN * std::pow(10.0, (n_users - j) * c_db / 10.0);
  return pr;
}

/// OSNR convention: osnr_db = 10*log10(P_r1/sigma), optical-power dB law.
inline double osnr_to_power(double osnr_db, double sigma) {
  if (!(sigma > 0.0)) throw domain_error("osnr_to_power: sigma must be > 0");
  return sigma * std::pow(10.0, osnr_db / 10.0);
}

inline double power_to_osnr(double p_r1, double sigma) {
  if (!(sigma > 0.0) || !(p_r1 > 0.0))
    throw domain_error("power_to_osnr: needs positive power and sigma");
  return 10.0 * std::log10(p_r1 / sigma);
}

struct NomaUser {
  double gain;          // h_j
  double power_weight;  // alpha_j = 1/h_j
};

/// Uplink scenario: users ordered by channel gain (h_1 <= ... <= h_N),
/// received-power plan P_rj from the back-off law, AWGN with std sigma.
/// Immutable after construction.
class NomaScenario {
 public:
  /// Gains + explicit power plan. Powers must be positive and
  /// nonincreasing user-to-user; P_max (if positive) is enforced.
  NomaScenario(std::vector<double> gains, std::vector<double> p_r, double sigma,
               int m_order, double p_max = 0.0)
      : sigma_(sigma), m_(m_order), p_max_(p_max), p_r_(std::move(p_r)) {
    init_users(std::move(gains));
    if (p_r_.size() != users_.size())
      throw domain_error("scenario: one received power per user required");
    for (std::size_t j = 0; j + 1 < p_r_.size(); ++j)
      if (p_r_[j] + 1e-15 < p_r_[j + 1])
        throw domain_error("scenario: received powers must be nonincreasing");
    for (double p : p_r_)
      if (!(p > 0.0)) throw domain_error("scenario: received powers must be > 0");
    c_db_ = users_.size() > 1
                ? 10.0 * std::log10(p_r_.front() / p_r_.back()) / (double(users_.size()) - 1.0)
                : 0.0;
    check_power_budget();
  }

  /// Gains + (P_max, P_rN): back-off from the power budget, user 1 at P_max.
  NomaScenario(std::vector<double> gains, double p_max, double p_rN, double sigma,
               int m_order)
      : sigma_(sigma), m_(m_order), p_max_(p_max) {
    init_users(std::move(gains));
    int n = static_cast<int>(users_.size());
    c_db_ = n > 1 ? power_backoff_db(p_max, users_.front().power_weight, p_rN, n) : 0.0;
    p_r_ = received_powers(p_rN, c_db_, n);
    check_power_budget();
  }

  int num_users() const { return static_cast<int>(users_.size()); }
  int mod_order() const { return m_; }
  double sigma() const { return sigma_; }
  double p_max() const { return p_max_; }
  double backoff_db() const { return c_db_; }
  const std::vector<NomaUser>& users() const { return users_; }
  /// 1-based user index (user 1 = weakest gain, largest received power).
  double gain(int j) const { return users_.at(j - 1).gain; }
  double alpha(int j) const { return users_.at(j - 1).power_weight; }
  double received_power(int j) const { return p_r_.at(j - 1); }
  const std::vector<double>& received_powers_vec() const { return p_r_; }

  double osnr_db() const { return power_to_osnr(p_r_.front(), sigma_); }

  /// Same powers, new noise level; used for OSNR sweeps.
  NomaScenario with_sigma(double sigma) const {
    NomaScenario s = *this;
    if (!(sigma >= 0.0)) throw domain_error("scenario: sigma must be >= 0");
    s.sigma_ = sigma;
    return s;
  }

  NomaScenario with_osnr_db(double osnr_db) const {
    return with_sigma(p_r_.front() / db_to_linear(osnr_db));
  }

  /// All powers scaled by a common factor (noise included).
  NomaScenario scaled(double factor) const {
    NomaScenario s = *this;
    s.sigma_ *= factor;
    for (double& p : s.p_r_) p *= factor;
    if (s.p_max_ > 0.0) s.p_max_ *= factor;
    return s;
  }

 private:
  void init_users(std::vector<double> gains) {
    if (gains.empty()) throw domain_error("scenario: at least one user required");
    if (m_ < 2 || !is_power_of_two(m_))
      throw domain_error("scenario: M must be a power of two, >= 2");
    if (!(sigma_ >= 0.0)) throw domain_error("scenario: sigma must be >= 0");
    for (double h : gains)
      if (!(h > 0.0)) throw domain_error("scenario: gains must be > 0");
    // Gains equal within 1e-12 keep their input order (stable sort).
    std::stable_sort(gains.begin(), gains.end(), [](double a, double b) {
      return a < b && !(std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)));
    });
    users_.reserve(gains.size());
    for (double h : gains) users_.push_back({h, 1.0 / h});
  }

  void check_power_budget() const {
    if (p_max_ <= 0.0) return;
    for (std::size_t j = 0; j < users_.size(); ++j)
      if (users_[j].power_weight * p_r_[j] > p_max_ * (1.0 + 1e-9))
        throw infeasible_error("scenario: alpha_j * P_rj exceeds P_max");
  }

  std::vector<NomaUser> users_;
  double sigma_;
  int m_;
  double p_max_ = 0.0;
  double c_db_ = 0.0;
  std::vector<double> p_r_;
};

}  // namespace psnoma
