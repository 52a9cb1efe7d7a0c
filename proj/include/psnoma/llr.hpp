#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "psnoma/ccdm.hpp"
#include "psnoma/ldpc.hpp"
#include "psnoma/rate.hpp"

namespace psnoma {

/// MAP bit metrics of one received symbol: natural-log ratios
/// L_l = log( sum_{x: bit_l=0} f(y|x) P(x) / sum_{x: bit_l=1} ... ),
/// with the interference-aware mixture likelihood and Gray bit labels.
/// Degenerate priors or vanished likelihood mass clip to +-kLlrClip.
class MapLlrComputer {
 public:
  MapLlrComputer(std::vector<double> levels, double sigma,
                 const InterferenceProfile& intf, double coeff_j = 1.0)
      : levels_(std::move(levels)), coeff_(coeff_j) {
    const int m = static_cast<int>(levels_.size());
    if (!is_power_of_two(m) || m < 2)
      throw domain_error("map_llr: level count must be a power of two");
    bits_per_symbol_ = log2_int(m);
    InterferenceMixture mix = expand_interference(intf);
    offsets_ = std::move(mix.offsets);
    log_w_ = std::move(mix.log_weights);
    // sigma = 0 is the exact-channel case; distance ordering still
    // resolves it with a tiny effective noise.
    double scale = 1.0;
    for (double l : levels_) scale = std::max(scale, std::abs(coeff_ * l));
    for (double o : offsets_) scale = std::max(scale, std::abs(o));
    sigma_ = std::max(sigma, 1e-12 * scale);
    bit_of_.assign(std::size_t(m) * bits_per_symbol_, 0);
    for (int i = 1; i <= m; ++i) {
      auto g = gray_map(i, m);
      for (int l = 0; l < bits_per_symbol_; ++l)
        bit_of_[std::size_t(i - 1) * bits_per_symbol_ + l] = g[l];
    }
  }

  int bits_per_symbol() const { return bits_per_symbol_; }

  /// Per-bit-level LLRs for one received sample under the given prior.
  void compute(double yhat, const Pmf& prior, double* out) const {
    const int m = static_cast<int>(levels_.size());
    loglik_.resize(m);
    const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
    for (int i = 0; i < m; ++i) {
      if (prior[i] <= 0.0) {
        loglik_[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double mx = -std::numeric_limits<double>::infinity();
      tmp_.resize(offsets_.size());
      for (std::size_t t = 0; t < offsets_.size(); ++t) {
        double d = yhat - coeff_ * levels_[i] - offsets_[t];
        tmp_[t] = log_w_[t] - d * d * inv2s2;
        mx = std::max(mx, tmp_[t]);
      }
      double s = 0.0;
      for (double v : tmp_) s += std::exp(v - mx);
      loglik_[i] = std::log(prior[i]) + mx + std::log(s);
    }
    for (int l = 0; l < bits_per_symbol_; ++l) {
      double mx0 = -std::numeric_limits<double>::infinity(), mx1 = mx0;
      for (int i = 0; i < m; ++i) {
        if (bit_of_[std::size_t(i) * bits_per_symbol_ + l])
          mx1 = std::max(mx1, loglik_[i]);
        else
          mx0 = std::max(mx0, loglik_[i]);
      }
      double s0 = 0.0, s1 = 0.0;
      for (int i = 0; i < m; ++i) {
        double v = loglik_[i];
        if (!std::isfinite(v)) continue;
        if (bit_of_[std::size_t(i) * bits_per_symbol_ + l])
          s1 += std::exp(v - mx1);
        else
          s0 += std::exp(v - mx0);
      }
      double l0 = std::isfinite(mx0) && s0 > 0.0 ? mx0 + std::log(s0)
                                                 : -std::numeric_limits<double>::infinity();
      double l1 = std::isfinite(mx1) && s1 > 0.0 ? mx1 + std::log(s1)
                                                 : -std::numeric_limits<double>::infinity();
      double llr;
      if (!std::isfinite(l0) && !std::isfinite(l1))
        llr = 0.0;
      else if (!std::isfinite(l1))
        llr = kLlrClip;
      else if (!std::isfinite(l0))
        llr = -kLlrClip;
      else
        llr = std::clamp(l0 - l1, -kLlrClip, kLlrClip);
      out[l] = llr;
    }
  }

 private:
  std::vector<double> levels_;
  double coeff_;
  double sigma_;
  int bits_per_symbol_;
  std::vector<double> offsets_, log_w_;
  std::vector<std::uint8_t> bit_of_;
  mutable std::vector<double> loglik_, tmp_;
};

/// Segment-aware LLRs for a whole frame: shaped prior for the first
/// n_p = n*R_FEC symbols, uniform prior for the parity symbols.
inline std::vector<double> map_llr_frame(const std::vector<double>& yhat,
                                         const FrameLayout& layout,
                                         const Pmf& shaped_prior,
                                         const MapLlrComputer& comp) {
  if (static_cast<int>(yhat.size()) != layout.n)
    throw domain_error("map_llr_frame: frame length mismatch");
  const Pmf uniform = uniform_pmf(layout.m);
  std::vector<double> llr(std::size_t(layout.n) * layout.bits_per_symbol());
  for (int t = 0; t < layout.n; ++t) {
    const Pmf& prior = t < layout.n_p ? shaped_prior : uniform;
    comp.compute(yhat[t], prior, &llr[std::size_t(t) * layout.bits_per_symbol()]);
  }
  return llr;
}

/// Single-sample MAP metric, 1-based time index into the frame.
inline std::vector<double> map_llr(double yhat_t, int t, const FrameLayout& layout,
                                   const Pmf& shaped_prior,
                                   const MapLlrComputer& comp) {
  if (t < 1 || t > layout.n) throw domain_error("map_llr: time index out of range");
  std::vector<double> out(layout.bits_per_symbol());
  const Pmf uniform = uniform_pmf(layout.m);
  comp.compute(yhat_t, t <= layout.n_p ? shaped_prior : uniform, out.data());
  return out;
}

}  // namespace psnoma
