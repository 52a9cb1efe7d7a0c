#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "psnoma/ccdm.hpp"
#include "psnoma/channel.hpp"
#include "psnoma/ldpc.hpp"
#include "psnoma/llr.hpp"
#include "psnoma/optimizer.hpp"

namespace psnoma {

/// One user's operating point in the link simulation.
struct SimUser {
  double delta = 1.0;
  Pmf pmf;                     // shaped prior p*_j
  double r_fec = 0.5;
  std::vector<double> levels;  // symbol values; empty = {delta, 2 delta, ...}

  std::vector<double> resolved_levels(int m) const {
    if (!levels.empty()) {
      if (static_cast<int>(levels.size()) != m)
        throw domain_error("sim: custom levels must have M entries");
      return levels;
    }
    std::vector<double> l(m);
    for (int i = 0; i < m; ++i) l[i] = delta * (i + 1.0);
    return l;
  }
};

struct SimConfig {
  std::vector<SimUser> users;  // user 1 first (decoded first)
  int frame_symbols = 2160;    // n, shared by all users
  int min_frame_errors = 50;
  long max_frames = 100000;
  int max_bp_iters = 50;
  std::uint64_t seed = 1;
  bool genie_sic = false;      // cancel with the true frames instead
  int ldpc_var_degree = 3;
  std::uint64_t ldpc_seed = 7;
};

struct FerReport {
  int user = 0;
  double osnr_db = 0.0;
  long frames = 0;
  long errors = 0;
  double fer = 0.0;
  double ci_lo = 0.0;  // 95% Wilson interval
  double ci_hi = 0.0;
  std::uint64_t seed = 0;
};

/// y_t = sum_j h_j x_{j,t} + w_t. Power allocation uses alpha_j = 1/h_j,
/// so each user's frame arrives at unit effective gain (checked).
inline std::vector<double> transmit(const NomaScenario& scn,
                                    const std::vector<SdtFrame>& frames,
                                    std::mt19937_64& rng) {
  if (static_cast<int>(frames.size()) != scn.num_users())
    throw domain_error("transmit: one frame per user required");
  const std::size_t n = frames.front().samples.size();
  for (const auto& f : frames)
    if (f.samples.size() != n) throw domain_error("transmit: frame length mismatch");
  for (int j = 1; j <= scn.num_users(); ++j)
    if (std::abs(scn.gain(j) * scn.alpha(j) - 1.0) > 1e-12)
      throw domain_error("transmit: h_j * alpha_j must be 1");

  std::vector<double> y(n, 0.0);
  for (int j = 1; j <= scn.num_users(); ++j)
    for (std::size_t t = 0; t < n; ++t)
      y[t] += scn.gain(j) * frames[j - 1].samples[t];
  if (scn.sigma() > 0.0) {
    std::normal_distribution<double> noise(0.0, scn.sigma());
    for (std::size_t t = 0; t < n; ++t) y[t] += noise(rng);
  }
  return y;
}

/// yhat_j = y - sum_{k<j} h_k x_k, with the re-encoded frames of the
/// already-decoded users.
inline std::vector<double> sic_cancel(const std::vector<double>& y,
                                      const std::vector<SdtFrame>& cancelled,
                                      const NomaScenario& scn) {
  std::vector<double> yhat = y;
  for (std::size_t k = 0; k < cancelled.size(); ++k) {
    const auto& f = cancelled[k].samples;
    if (f.size() != y.size()) throw domain_error("sic_cancel: frame length mismatch");
    double h = scn.gain(static_cast<int>(k) + 1);
    for (std::size_t t = 0; t < y.size(); ++t) yhat[t] -= h * f[t];
  }
  return yhat;
}

namespace detail {

/// Everything derived once per user for the frame codec chain.
struct UserCodec {
  FrameLayout layout{0, 0, 2, 1.0, 0};
  Composition comp;
  std::shared_ptr<SystematicCode> code;  // null when R_FEC = 1
  std::vector<double> levels;
  double alpha = 1.0;
  Pmf prior;

  int info_bits() const { return layout.k_info; }
};

inline UserCodec make_codec(const NomaScenario& scn, int user_j, const SimUser& u,
                            const SimConfig& cfg) {
  UserCodec c;
  const int m = scn.mod_order();
  const int bps = log2_int(m);
  double np_exact = cfg.frame_symbols * u.r_fec;
  int n_p = static_cast<int>(std::lround(np_exact));
  if (std::abs(np_exact - n_p) > 1e-6)
    throw domain_error("sim: frame_symbols * R_FEC must be an integer");
  c.comp = quantize_composition(u.pmf, n_p);
  c.layout = FrameLayout::make(n_p, u.r_fec, m, ccdm_input_bits(c.comp));
  c.levels = u.resolved_levels(m);
  c.alpha = scn.alpha(user_j);
  c.prior = u.pmf;
  if (u.r_fec < 1.0) {
    c.code = std::make_shared<SystematicCode>(SystematicCode::make_peg(
        cfg.frame_symbols * bps, u.r_fec, cfg.ldpc_seed + user_j,
        cfg.ldpc_var_degree));
  }
  return c;
}

inline std::vector<std::uint8_t> symbols_to_bits(const std::vector<int>& idx0,
                                                 int m) {
  const int bps = log2_int(m);
  std::vector<std::uint8_t> bits;
  bits.reserve(idx0.size() * bps);
  for (int s : idx0) {
    auto g = gray_map(s + 1, m);
    bits.insert(bits.end(), g.begin(), g.end());
  }
  return bits;
}

inline std::vector<int> bits_to_symbols(const std::vector<std::uint8_t>& bits,
                                        int m) {
  const int bps = log2_int(m);
  std::vector<int> idx0(bits.size() / bps);
  std::vector<std::uint8_t> group(bps);
  for (std::size_t s = 0; s < idx0.size(); ++s) {
    for (int b = 0; b < bps; ++b) group[b] = bits[s * bps + b];
    idx0[s] = gray_demap(group) - 1;
  }
  return idx0;
}

inline SdtFrame frame_from_symbols(const std::vector<int>& shaped_idx0,
                                   const std::vector<int>& parity_idx0,
                                   const UserCodec& c) {
  std::vector<double> sp(shaped_idx0.size()), su(parity_idx0.size());
  for (std::size_t i = 0; i < sp.size(); ++i) sp[i] = c.levels[shaped_idx0[i]];
  for (std::size_t i = 0; i < su.size(); ++i) su[i] = c.levels[parity_idx0[i]];
  return assemble_frame(sp, su, c.alpha, c.layout);
}

}  // namespace detail

/// Full encoder chain for one user: info bits -> matcher -> Gray bits ->
/// systematic parity -> parity symbols -> scaled sparse-dense frame.
inline SdtFrame encode_user_frame(const std::vector<std::uint8_t>& info,
                                  const detail::UserCodec& c) {
  std::vector<int> shaped = ccdm_encode(info, c.comp);
  std::vector<int> parity_sym;
  if (c.code) {
    auto z_p = detail::symbols_to_bits(shaped, c.layout.m);
    auto z_u = c.code->encode(z_p);
    parity_sym = detail::bits_to_symbols(z_u, c.layout.m);
  }
  return detail::frame_from_symbols(shaped, parity_sym, c);
}

struct ReceiveResult {
  std::vector<std::uint8_t> info;
  bool frame_ok = false;    // info matches the transmitted bits
  bool decode_valid = false;  // FEC converged and dematching succeeded
  SdtFrame reencoded;       // for SIC
};

/// Decoder chain of one user: segment-aware MAP metrics, BP, Gray demap,
/// dematcher; the re-modulated frame is rebuilt from the decoded bits.
inline ReceiveResult receive_user(const std::vector<double>& yhat,
                                  const detail::UserCodec& c,
                                  const MapLlrComputer& llr_comp,
                                  const std::vector<std::uint8_t>& true_info,
                                  int max_bp_iters) {
  ReceiveResult res;
  std::vector<int> shaped_idx;
  if (c.code) {
    auto llr = map_llr_frame(yhat, c.layout, c.prior, llr_comp);
    BpResult bp = c.code->bp_decode(llr, max_bp_iters);
    shaped_idx = detail::bits_to_symbols(bp.systematic, c.layout.m);
    res.decode_valid = bp.converged;
  } else {
    // Uncoded shaped frame: hard per-bit MAP decisions.
    auto llr = map_llr_frame(yhat, c.layout, c.prior, llr_comp);
    std::vector<std::uint8_t> hard(llr.size());
    for (std::size_t i = 0; i < llr.size(); ++i) hard[i] = llr[i] < 0 ? 1 : 0;
    shaped_idx = detail::bits_to_symbols(hard, c.layout.m);
    res.decode_valid = true;
  }

  try {
    res.info = ccdm_decode(shaped_idx, c.comp);
  } catch (const codec_error&) {
    res.info.clear();
    res.decode_valid = false;
  }
  res.frame_ok = !res.info.empty() && res.info == true_info;

  // Re-encode/re-modulate for cancellation. When the dematcher failed,
  // rebuild from the hard-decoded symbols directly (matcher round trips
  // are the identity on valid codewords).
  std::vector<int> parity_idx;
  if (c.code) {
    auto z_p = detail::symbols_to_bits(shaped_idx, c.layout.m);
    parity_idx = detail::bits_to_symbols(c.code->encode(z_p), c.layout.m);
  }
  res.reencoded = detail::frame_from_symbols(shaped_idx, parity_idx, c);
  return res;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline void wilson_interval(long errors, long frames, double& lo, double& hi) {
  if (frames == 0) {
    lo = 0.0;
    hi = 1.0;
    return;
  }
  const double z = 1.959963984540054;
  double p = double(errors) / frames;
  double z2n = z * z / frames;
  double centre = (p + z2n / 2) / (1 + z2n);
  double half = z * std::sqrt(p * (1 - p) / frames + z2n / (4 * frames)) / (1 + z2n);
  lo = std::max(0.0, centre - half);
  hi = std::min(1.0, centre + half);
}

}  // namespace detail

/// Monte-Carlo frame error rates with real SIC (decoded frames cancel;
/// genie mode substitutes the true frames). Deterministic per seed:
/// every frame draws its randomness from a counter-derived stream.
inline std::vector<FerReport> fer_monte_carlo(const NomaScenario& scn,
                                              const SimConfig& cfg) {
  const int n_users = scn.num_users();
  if (static_cast<int>(cfg.users.size()) != n_users)
    throw domain_error("fer: one SimUser per scenario user required");

  std::vector<detail::UserCodec> codecs;
  std::vector<MapLlrComputer> llrs;
  codecs.reserve(n_users);
  for (int j = 1; j <= n_users; ++j)
    codecs.push_back(detail::make_codec(scn, j, cfg.users[j - 1], cfg));
  for (int j = 1; j <= n_users; ++j) {
    // Interference at user j's decoder: the not-yet-cancelled users.
    InterferenceProfile intf;
    for (int k = j + 1; k <= n_users; ++k) {
      Interferer e;
      e.delta = cfg.users[k - 1].delta;
      e.pmf = cfg.users[k - 1].pmf;
      e.gain = scn.gain(k);
      e.alpha = scn.alpha(k);
      intf.entries.push_back(std::move(e));
    }
    std::vector<double> rx_levels = codecs[j - 1].levels;
    llrs.emplace_back(rx_levels, scn.sigma(), intf,
                      scn.gain(j) * scn.alpha(j));
  }

  std::vector<long> errors(n_users, 0);
  long frames_done = 0;
  auto all_done = [&] {
    if (frames_done >= cfg.max_frames) return true;
    for (long e : errors)
      if (e < cfg.min_frame_errors) return false;
    return true;
  };

  while (!all_done()) {
    std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ (0x5151ull * (frames_done + 1))));
    // Per-user information bits and transmit frames.
    std::vector<std::vector<std::uint8_t>> infos(n_users);
    std::vector<SdtFrame> tx(n_users);
    for (int j = 0; j < n_users; ++j) {
      infos[j].resize(codecs[j].info_bits());
      for (auto& b : infos[j]) b = rng() & 1u;
      tx[j] = encode_user_frame(infos[j], codecs[j]);
    }
    std::vector<double> y = transmit(scn, tx, rng);

    std::vector<SdtFrame> cancelled;
    for (int j = 0; j < n_users; ++j) {
      std::vector<double> yhat = sic_cancel(y, cancelled, scn);
      ReceiveResult r =
          receive_user(yhat, codecs[j], llrs[j], infos[j], cfg.max_bp_iters);
      if (!r.frame_ok) errors[j]++;
      cancelled.push_back(cfg.genie_sic ? tx[j] : r.reencoded);
    }
    ++frames_done;
  }

  std::vector<FerReport> out(n_users);
  for (int j = 0; j < n_users; ++j) {
    out[j].user = j + 1;
    out[j].osnr_db = scn.sigma() > 0.0 ? scn.osnr_db() : 0.0;
    out[j].frames = frames_done;
    out[j].errors = errors[j];
    out[j].fer = frames_done ? double(errors[j]) / frames_done : 0.0;
    detail::wilson_interval(errors[j], frames_done, out[j].ci_lo, out[j].ci_hi);
    out[j].seed = cfg.seed;
  }
  return out;
}

}  // namespace psnoma
