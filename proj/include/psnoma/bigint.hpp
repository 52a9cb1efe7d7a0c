#pragma once

#include <cstdint>
#include <vector>

#include "psnoma/common.hpp"

namespace psnoma {

/// Arbitrary-size unsigned integer, little-endian 64-bit limbs. Supports
/// exactly the operations the fixed-length matcher needs: compare,
/// add/subtract, multiply/divide by a machine word, bit extraction.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(std::uint64_t v) {
    if (v) limbs_.push_back(v);
  }

  bool is_zero() const { return limbs_.empty(); }

  int bit_length() const {
    if (limbs_.empty()) return 0;
    std::uint64_t top = limbs_.back();
    int bits = 0;
    while (top) {
      ++bits;
      top >>= 1;
    }
    return bits + 64 * (static_cast<int>(limbs_.size()) - 1);
  }

  bool bit(int i) const {
    std::size_t limb = static_cast<std::size_t>(i) / 64;
    if (limb >= limbs_.size()) return false;
    return (limbs_[limb] >> (i % 64)) & 1u;
  }

  void set_bit(int i) {
    std::size_t limb = static_cast<std::size_t>(i) / 64;
    if (limb >= limbs_.size()) limbs_.resize(limb + 1, 0);
    limbs_[limb] |= std::uint64_t(1) << (i % 64);
  }

  // -1 / 0 / +1 for a < b, a == b, a > b.
  static int compare(const BigUint& a, const BigUint& b) {
    if (a.limbs_.size() != b.limbs_.size())
      return a.limbs_.size() < b.limbs_.size() ? -1 : 1;
    for (std::size_t i = a.limbs_.size(); i-- > 0;) {
      if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] < b.limbs_[i] ? -1 : 1;
    }
    return 0;
  }

  bool operator<(const BigUint& o) const { return compare(*this, o) < 0; }
  bool operator>=(const BigUint& o) const { return compare(*this, o) >= 0; }
  bool operator==(const BigUint& o) const { return compare(*this, o) == 0; }

  BigUint& operator+=(const BigUint& o) {
    if (o.limbs_.size() > limbs_.size()) limbs_.resize(o.limbs_.size(), 0);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      unsigned __int128 s = carry + limbs_[i];
      if (i < o.limbs_.size()) s += o.limbs_[i];
      limbs_[i] = static_cast<std::uint64_t>(s);
      carry = s >> 64;
    }
    if (carry) limbs_.push_back(static_cast<std::uint64_t>(carry));
    return *this;
  }

  // Requires *this >= o.
  BigUint& operator-=(const BigUint& o) {
    if (compare(*this, o) < 0)
      throw domain_error("biguint: subtraction would underflow");
    unsigned __int128 borrow = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      unsigned __int128 sub = borrow + (i < o.limbs_.size() ? o.limbs_[i] : 0);
      if (limbs_[i] >= sub) {
        limbs_[i] -= static_cast<std::uint64_t>(sub);
        borrow = 0;
      } else {
        limbs_[i] = static_cast<std::uint64_t>(
            ((static_cast<unsigned __int128>(1) << 64) + limbs_[i]) - sub);
        borrow = 1;
      }
    }
    trim();
    return *this;
  }

  BigUint& mul_small(std::uint64_t f) {
    if (f == 0) {
      limbs_.clear();
      return *this;
    }
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      unsigned __int128 prod = static_cast<unsigned __int128>(limbs_[i]) * f + carry;
      limbs_[i] = static_cast<std::uint64_t>(prod);
      carry = prod >> 64;
    }
    if (carry) limbs_.push_back(static_cast<std::uint64_t>(carry));
    return *this;
  }

  /// Divide by a machine word, returning the remainder.
  std::uint64_t div_small(std::uint64_t d) {
    if (d == 0) throw domain_error("biguint: division by zero");
    unsigned __int128 rem = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      unsigned __int128 cur = (rem << 64) | limbs_[i];
      limbs_[i] = static_cast<std::uint64_t>(cur / d);
      rem = cur % d;
    }
    trim();
    return static_cast<std::uint64_t>(rem);
  }

 private:
  void trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }
  std::vector<std::uint64_t> limbs_;
};

}  // namespace psnoma
