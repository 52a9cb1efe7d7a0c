#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "psnoma/bigint.hpp"
#include "psnoma/common.hpp"

namespace psnoma {

struct codec_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed symbol counts of one matcher output block.
struct Composition {
  std::vector<int> counts;  // per symbol index 0..M-1

  int n_p() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
  int order() const { return static_cast<int>(counts.size()); }

  void validate() const {
    if (counts.empty()) throw domain_error("composition: empty");
    for (int c : counts)
      if (c < 0) throw domain_error("composition: negative count");
    if (n_p() < 1) throw domain_error("composition: zero length");
  }
};

/// multinomial(n_p; counts) as an exact integer, built from the product
/// of binomial coefficients with exact division at every step.
inline BigUint multinomial(const Composition& comp) {
  comp.validate();
  BigUint w(1);
  std::uint64_t placed = 0;
  for (int c : comp.counts) {
    for (int i = 1; i <= c; ++i) {
      ++placed;
      w.mul_small(placed);
      if (w.div_small(i) != 0)
        throw convergence_error("multinomial: inexact division");
    }
  }
  return w;
}

/// Fixed-length matcher input size: floor(log2 multinomial).
inline int ccdm_input_bits(const Composition& comp) {
  BigUint w = multinomial(comp);
  return std::max(0, w.bit_length() - 1);
}

/// Integer composition with counts/n_p closest to p in Kullback-Leibler
/// divergence, reached by largest-remainder rounding plus unit-transfer
/// local search. Deterministic.
inline Composition quantize_composition(const Pmf& p, int n_p) {
  require_pmf(p, "quantize_composition");
  if (n_p < 1) throw domain_error("quantize_composition: n_p must be >= 1");
  const int m = static_cast<int>(p.size());
  Composition comp;
  comp.counts.assign(m, 0);

  std::vector<double> frac(m);
  int assigned = 0;
  for (int i = 0; i < m; ++i) {
    double exact = p[i] * n_p;
    comp.counts[i] = static_cast<int>(std::floor(exact));
    frac[i] = exact - comp.counts[i];
    assigned += comp.counts[i];
  }
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return frac[a] != frac[b] ? frac[a] > frac[b] : a < b;
  });
  for (int k = 0; assigned < n_p; ++k, ++assigned) comp.counts[order[k % m]]++;

  auto kl = [&](const std::vector<int>& c) {
    double d = 0.0;
    for (int i = 0; i < m; ++i) {
      if (c[i] == 0) continue;
      if (p[i] == 0.0) return std::numeric_limits<double>::infinity();
      double q = double(c[i]) / n_p;
      d += q * std::log2(q / p[i]);
    }
    return d;
  };

  double best = kl(comp.counts);
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < m; ++i) {
      if (comp.counts[i] == 0) continue;
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        comp.counts[i]--;
        comp.counts[j]++;
        double d = kl(comp.counts);
        if (d < best - 1e-15) {
          best = d;
          improved = true;
        } else {
          comp.counts[i]++;
          comp.counts[j]--;
        }
      }
    }
  }
  return comp;
}

namespace detail {

inline BigUint bits_to_index(const std::vector<std::uint8_t>& bits) {
  BigUint r;
  const int k = static_cast<int>(bits.size());
  for (int i = 0; i < k; ++i)
    if (bits[i]) r.set_bit(k - 1 - i);  // MSB first
  return r;
}

inline std::vector<std::uint8_t> index_to_bits(const BigUint& r, int k) {
  std::vector<std::uint8_t> bits(k);
  for (int i = 0; i < k; ++i) bits[i] = r.bit(k - 1 - i) ? 1 : 0;
  return bits;
}

}  // namespace detail

/// Maps k uniform bits to a sequence with exactly the target composition
/// (multiset unranking in canonical symbol order). Output symbols are
/// 0-based constellation indices.
inline std::vector<int> ccdm_encode(const std::vector<std::uint8_t>& bits,
                                    const Composition& comp) {
  const int k = ccdm_input_bits(comp);
  if (static_cast<int>(bits.size()) != k)
    throw codec_error("ccdm_encode: input must be exactly k bits");
  const int n = comp.n_p();
  const int m = comp.order();

  BigUint rank = detail::bits_to_index(bits);
  BigUint w = multinomial(comp);
  std::vector<int> counts = comp.counts;
  std::vector<int> out;
  out.reserve(n);

  for (int rem = n; rem > 0; --rem) {
    for (int a = 0; a < m; ++a) {
      if (counts[a] == 0) continue;
      BigUint na = w;  // completions starting with symbol a
      na.mul_small(counts[a]);
      if (na.div_small(rem) != 0)
        throw convergence_error("ccdm_encode: inexact branch count");
      if (rank < na) {
        out.push_back(a);
        counts[a]--;
        w = na;
        break;
      }
      rank -= na;
    }
  }
  return out;
}

/// Inverse map (multiset ranking). Throws codec_error on composition
/// mismatch or when the recovered rank falls outside the k-bit range.
inline std::vector<std::uint8_t> ccdm_decode(const std::vector<int>& symbols,
                                             const Composition& comp) {
  const int n = comp.n_p();
  const int m = comp.order();
  if (static_cast<int>(symbols.size()) != n)
    throw codec_error("ccdm_decode: length mismatch");
  std::vector<int> check(m, 0);
  for (int s : symbols) {
    if (s < 0 || s >= m) throw codec_error("ccdm_decode: symbol out of range");
    check[s]++;
  }
  if (check != comp.counts)
    throw codec_error("ccdm_decode: composition mismatch");

  const int k = ccdm_input_bits(comp);
  BigUint rank;
  BigUint w = multinomial(comp);
  std::vector<int> counts = comp.counts;

  for (int t = 0; t < n; ++t) {
    const int rem = n - t;
    const int sym = symbols[t];
    for (int a = 0; a < sym; ++a) {
      if (counts[a] == 0) continue;
      BigUint na = w;
      na.mul_small(counts[a]);
      na.div_small(rem);
      rank += na;
    }
    BigUint ns = w;
    ns.mul_small(counts[sym]);
    ns.div_small(rem);
    w = ns;
    counts[sym]--;
  }

  if (rank.bit_length() > k)
    throw codec_error("ccdm_decode: rank outside the matcher interval");
  return detail::index_to_bits(rank, k);
}

/// Gray label of constellation index i in 1..M, MSB first.
inline std::vector<std::uint8_t> gray_map(int index_i, int m) {
  if (!is_power_of_two(m) || m < 2) throw domain_error("gray_map: bad order");
  if (index_i < 1 || index_i > m) throw domain_error("gray_map: index out of range");
  const int bits = log2_int(m);
  unsigned g = unsigned(index_i - 1) ^ (unsigned(index_i - 1) >> 1);
  std::vector<std::uint8_t> out(bits);
  for (int b = 0; b < bits; ++b) out[b] = (g >> (bits - 1 - b)) & 1u;
  return out;
}

inline int gray_demap(const std::vector<std::uint8_t>& bits) {
  if (bits.empty() || bits.size() > 30) throw domain_error("gray_demap: bad width");
  unsigned g = 0;
  for (std::uint8_t b : bits) g = (g << 1) | (b & 1u);
  for (unsigned mask = g >> 1; mask; mask >>= 1) g ^= mask;
  return static_cast<int>(g) + 1;
}

/// Codeword layout of the sparse-dense frame.
struct FrameLayout {
  int n_p;       // shaped symbols
  int n;         // total symbols, n = n_p / R_FEC
  int m;         // constellation order
  double r_fec;
  int k_info;    // matcher input bits

  int bits_per_symbol() const { return log2_int(m); }
  int systematic_bits() const { return n_p * bits_per_symbol(); }
  int parity_bits() const { return (n - n_p) * bits_per_symbol(); }
  int parity_symbols() const { return n - n_p; }

  static FrameLayout make(int n_p, double r_fec, int m, int k_info = 0) {
    if (n_p < 1) throw domain_error("frame layout: n_p must be >= 1");
    CodingConfigCheck(r_fec);
    double n_exact = n_p / r_fec;
    int n = static_cast<int>(std::lround(n_exact));
    if (std::abs(n * r_fec - n_p) > 1e-6)
      throw domain_error("frame layout: n_p / R_FEC is not an integer");
    if (!is_power_of_two(m) || m < 2)
      throw domain_error("frame layout: M must be a power of two");
    return {n_p, n, m, r_fec, k_info};
  }

 private:
  static void CodingConfigCheck(double r) {
    if (!(r > 0.0 && r <= 1.0))
      throw domain_error("frame layout: R_FEC must lie in (0,1]");
  }
};

/// One transmit codeword: x = alpha * [shaped segment, uniform segment].
struct SdtFrame {
  std::vector<double> samples;
  int n_p = 0;
};

inline SdtFrame assemble_frame(const std::vector<double>& shaped,
                               const std::vector<double>& uniform_part,
                               double alpha, const FrameLayout& layout) {
  if (static_cast<int>(shaped.size()) != layout.n_p ||
      static_cast<int>(uniform_part.size()) != layout.parity_symbols())
    throw codec_error("assemble_frame: segment length mismatch");
  SdtFrame f;
  f.n_p = layout.n_p;
  f.samples.reserve(layout.n);
  for (double s : shaped) f.samples.push_back(alpha * s);
  for (double s : uniform_part) f.samples.push_back(alpha * s);
  return f;
}

}  // namespace psnoma
