#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "psnoma/common.hpp"

namespace psnoma {

inline constexpr double kLlrClip = 30.0;

struct BpResult {
  std::vector<std::uint8_t> systematic;
  bool converged = false;
  int iterations = 0;
};

/// Systematic binary LDPC code. The parity-check matrix comes from a
/// seeded progressive-edge-growth construction; Gaussian elimination
/// over GF(2) picks an invertible parity column set, the columns are
/// permuted so the codeword reads [systematic | parity], and the dense
/// parity generator C (z_u = C z_p) is extracted from the reduced form.
class SystematicCode {
 public:
  int n() const { return n_; }
  int k() const { return k_; }
  int parity() const { return n_ - k_; }
  double rate() const { return double(k_) / n_; }

  /// Parity bits for one systematic block.
  std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& info) const {
    if (static_cast<int>(info.size()) != k_)
      throw domain_error("fec_encode: systematic length mismatch");
    const int m = parity();
    const std::size_t words = (m + 63) / 64;
    std::vector<std::uint64_t> acc(words, 0);
    for (int j = 0; j < k_; ++j) {
      if (!info[j]) continue;
      const std::uint64_t* col = &c_cols_[j * words];
      for (std::size_t w = 0; w < words; ++w) acc[w] ^= col[w];
    }
    std::vector<std::uint8_t> out(m);
    for (int r = 0; r < m; ++r) out[r] = (acc[r / 64] >> (r % 64)) & 1u;
    return out;
  }

  bool parity_ok(const std::vector<std::uint8_t>& codeword) const {
    for (const auto& row : rows_) {
      unsigned s = 0;
      for (int v : row) s ^= codeword[v];
      if (s) return false;
    }
    return true;
  }

  /// Flooding sum-product decoder; stops early once every check is
  /// satisfied. Non-convergence is reported, not thrown.
  BpResult bp_decode(const std::vector<double>& llr, int max_iters = 50) const {
    if (static_cast<int>(llr.size()) != n_)
      throw domain_error("bp_decode: LLR length mismatch");
    const std::size_t edges = edge_var_.size();
    std::vector<double> chan(n_);
    for (int v = 0; v < n_; ++v)
      chan[v] = std::clamp(llr[v], -kLlrClip, kLlrClip);

    std::vector<double> var_to_check(edges, 0.0), check_to_var(edges, 0.0);
    for (std::size_t e = 0; e < edges; ++e) var_to_check[e] = chan[edge_var_[e]];

    std::vector<double> posterior(n_);
    std::vector<std::uint8_t> hard(n_);
    BpResult res;
    for (int it = 1; it <= max_iters; ++it) {
      // check update (tanh rule)
      for (std::size_t c = 0; c < row_edges_.size(); ++c) {
        const auto& es = row_edges_[c];
        double prod = 1.0;
        int zeros = 0;
        std::size_t zero_edge = 0;
        for (std::size_t e : es) {
          double t = std::tanh(0.5 * var_to_check[e]);
          if (std::abs(t) < 1e-300) {
            ++zeros;
            zero_edge = e;
            continue;
          }
          prod *= t;
        }
        for (std::size_t e : es) {
          double t = std::tanh(0.5 * var_to_check[e]);
          double ex;
          if (zeros == 0) {
            ex = prod / t;
          } else if (zeros == 1) {
            ex = (e == zero_edge) ? prod : 0.0;
          } else {
            ex = 0.0;
          }
          ex = std::clamp(ex, -0.9999999999999, 0.9999999999999);
          check_to_var[e] = std::clamp(2.0 * std::atanh(ex), -kLlrClip, kLlrClip);
        }
      }
      // variable update and posterior
      for (int v = 0; v < n_; ++v) posterior[v] = chan[v];
      for (std::size_t e = 0; e < edges; ++e) posterior[edge_var_[e]] += check_to_var[e];
      for (std::size_t e = 0; e < edges; ++e)
        var_to_check[e] = std::clamp(posterior[edge_var_[e]] - check_to_var[e],
                                     -kLlrClip, kLlrClip);
      for (int v = 0; v < n_; ++v) hard[v] = posterior[v] < 0.0 ? 1 : 0;
      res.iterations = it;
      if (parity_ok(hard)) {
        res.converged = true;
        break;
      }
    }
    res.systematic.assign(hard.begin(), hard.begin() + k_);
    return res;
  }

  /// Seeded PEG construction at a given block length and rate.
  /// block_bits * (1 - rate) must be an integer number of parity bits.
  static SystematicCode make_peg(int block_bits, double rate, std::uint64_t seed,
                                 int var_degree = 3) {
    if (block_bits < 8) throw domain_error("ldpc: block too short");
    if (!(rate > 0.0 && rate < 1.0)) throw domain_error("ldpc: rate must be in (0,1)");
    int k = static_cast<int>(std::lround(block_bits * rate));
    if (std::abs(block_bits * rate - k) > 1e-6)
      throw domain_error("ldpc: block_bits * rate is not an integer");
    for (int attempt = 0; attempt < 10; ++attempt) {
      SystematicCode code;
      if (code.build(block_bits, k, seed + attempt, var_degree)) return code;
    }
    throw convergence_error("ldpc: failed to build a full-rank code");
  }

  /// Coordinate text format: header "ldpc n m rate", one "row col" pair
  /// per line. Columns are in transmit order (systematic first).
  void save(std::ostream& os) const {
    os << "ldpc " << n_ << ' ' << int(rows_.size()) << ' ' << rate() << '\n';
    for (std::size_t r = 0; r < rows_.size(); ++r)
      for (int v : rows_[r]) os << r << ' ' << v << '\n';
  }

  static SystematicCode load(std::istream& is) {
    std::string tag;
    int n = 0, m = 0;
    double rate = 0.0;
    is >> tag >> n >> m >> rate;
    if (tag != "ldpc" || n <= 0 || m <= 0 || m >= n)
      throw domain_error("ldpc: bad code file header");
    std::vector<std::vector<int>> rows(m);
    int r, v;
    while (is >> r >> v) {
      if (r < 0 || r >= m || v < 0 || v >= n)
        throw domain_error("ldpc: coordinate out of range");
      rows[r].push_back(v);
    }
    SystematicCode code;
    code.n_ = n;
    code.k_ = n - m;
    code.rows_ = std::move(rows);
    if (!code.finalize_from_rows())
      throw domain_error("ldpc: loaded matrix has no invertible parity part");
    return code;
  }

 private:
  // --- construction ---------------------------------------------------

  bool build(int n, int k, std::uint64_t seed, int dv) {
    n_ = n;
    k_ = k;
    const int m = n - k;
    std::mt19937_64 rng(seed);

    // PEG: connect each variable's edges to checks that are as far away
    // as possible in the current subgraph, lowest degree first.
    rows_.assign(m, {});
    std::vector<std::vector<int>> var_checks(n);
    std::vector<int> check_deg(m, 0);
    std::vector<int> tie_order(m);
    for (int c = 0; c < m; ++c) tie_order[c] = c;
    std::shuffle(tie_order.begin(), tie_order.end(), rng);

    std::vector<int> dist(m);
    for (int v = 0; v < n; ++v) {
      for (int e = 0; e < dv; ++e) {
        int chosen = -1;
        if (var_checks[v].empty()) {
          for (int c : tie_order)
            if (chosen < 0 || check_deg[c] < check_deg[chosen]) chosen = c;
        } else {
          bfs_check_distances(v, var_checks, dist);
          int best_dist = -2;
          for (int c : tie_order) {
            int d = dist[c];  // -1 = unreachable
            int rank_d = d < 0 ? 1 << 29 : d;
            if (chosen < 0 || rank_d > best_dist ||
                (rank_d == best_dist && check_deg[c] < check_deg[chosen])) {
              if (std::find(var_checks[v].begin(), var_checks[v].end(), c) ==
                  var_checks[v].end()) {
                chosen = c;
                best_dist = rank_d;
              }
            }
          }
        }
        if (chosen < 0) return false;
        var_checks[v].push_back(chosen);
        rows_[chosen].push_back(v);
        check_deg[chosen]++;
      }
    }
    return finalize_from_rows();
  }

  void bfs_check_distances(int v0, const std::vector<std::vector<int>>& var_checks,
                           std::vector<int>& dist) const {
    dist.assign(rows_.size(), -1);
    std::vector<int> var_dist(n_, -1);
    std::deque<int> frontier;  // variables
    var_dist[v0] = 0;
    frontier.push_back(v0);
    while (!frontier.empty()) {
      int v = frontier.front();
      frontier.pop_front();
      for (int c : var_checks[v]) {
        if (dist[c] >= 0) continue;
        dist[c] = var_dist[v];
        for (int v2 : rows_[c]) {
          if (var_dist[v2] >= 0) continue;
          var_dist[v2] = dist[c] + 1;
          frontier.push_back(v2);
        }
      }
    }
  }

  // Gaussian elimination: pick parity columns (preferring the rightmost),
  // permute them to the back, extract the dense parity generator.
  bool finalize_from_rows() {
    const int m = static_cast<int>(rows_.size());
    const std::size_t words = (n_ + 63) / 64;
    std::vector<std::vector<std::uint64_t>> h(m,
                                              std::vector<std::uint64_t>(words, 0));
    for (int r = 0; r < m; ++r)
      for (int v : rows_[r]) h[r][v / 64] |= std::uint64_t(1) << (v % 64);

    auto get = [&](int r, int c) -> bool {
      return (h[r][c / 64] >> (c % 64)) & 1u;
    };

    std::vector<int> pivot_col;
    std::vector<char> is_pivot(n_, 0);
    int row = 0;
    for (int c = n_ - 1; c >= 0 && row < m; --c) {
      int pr = -1;
      for (int r = row; r < m; ++r)
        if (get(r, c)) {
          pr = r;
          break;
        }
      if (pr < 0) continue;
      std::swap(h[pr], h[row]);
      for (int r = 0; r < m; ++r) {
        if (r != row && get(r, c)) {
          for (std::size_t w = 0; w < words; ++w) h[r][w] ^= h[row][w];
        }
      }
      pivot_col.push_back(c);
      is_pivot[c] = 1;
      ++row;
    }
    if (row < m) return false;  // rank deficient

    // Transmit order: non-pivot (systematic) columns ascending, then
    // pivot (parity) columns ascending. Keeping both blocks ascending
    // makes reloading a saved code a fixed point of this conversion.
    std::vector<int> old_to_new(n_, -1);
    int pos = 0;
    for (int c = 0; c < n_; ++c)
      if (!is_pivot[c]) old_to_new[c] = pos++;
    for (int c = 0; c < n_; ++c)
      if (is_pivot[c]) old_to_new[c] = pos++;

    // Dense parity generator from the reduced rows: the parity bit that
    // lives at row r's pivot column equals the XOR of the systematic
    // bits present in reduced row r.
    const std::size_t pw = (m + 63) / 64;
    c_cols_.assign(std::size_t(k_) * pw, 0);
    for (int r = 0; r < m; ++r) {
      const int slot = old_to_new[pivot_col[r]] - k_;
      for (int c = 0; c < n_; ++c) {
        if (is_pivot[c] || !get(r, c)) continue;
        int j = old_to_new[c];
        c_cols_[std::size_t(j) * pw + slot / 64] |= std::uint64_t(1) << (slot % 64);
      }
    }

    // Re-index the sparse rows into transmit order for the decoder.
    for (auto& rvs : rows_)
      for (int& v : rvs) v = old_to_new[v];
    edge_var_.clear();
    row_edges_.assign(m, {});
    for (int r = 0; r < m; ++r) {
      std::sort(rows_[r].begin(), rows_[r].end());
      for (int v : rows_[r]) {
        row_edges_[r].push_back(edge_var_.size());
        edge_var_.push_back(v);
      }
    }
    return true;
  }

  int n_ = 0;
  int k_ = 0;
  std::vector<std::vector<int>> rows_;           // check -> variable indices
  std::vector<std::vector<std::size_t>> row_edges_;
  std::vector<int> edge_var_;
  std::vector<std::uint64_t> c_cols_;            // parity generator, column bitsets
};

}  // namespace psnoma
