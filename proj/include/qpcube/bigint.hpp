#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpcube {

// Unsigned big integer with 64-bit little-endian limbs. Subgraph counts such
// as 2^d t^{t-3} C(d,t-1) overflow 64 bits well below d = 62, and the m_p
// boundary test needs exact powers of 53-bit integers.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(std::uint64_t v) {
    if (v != 0) limbs_.push_back(v);
  }

  static BigUint pow2(std::uint64_t bits) {
    BigUint r(1);
    r.shl(bits);
    return r;
  }

  static BigUint pow(std::uint64_t base, std::uint64_t exp) {
    BigUint acc(1);
    BigUint b(base);
    while (exp != 0) {
      if (exp & 1) acc = acc * b;
      exp >>= 1;
      if (exp != 0) b = b * b;
    }
    return acc;
  }

  static BigUint binomial(unsigned n, unsigned k) {
    if (k > n) return BigUint();
    if (k > n - k) k = n - k;
    BigUint r(1);
    for (unsigned i = 1; i <= k; ++i) {
      r.mul_u64(n - k + i);
      std::uint64_t rem = r.divmod_u64(i);
      if (rem != 0) throw std::logic_error("BigUint::binomial: inexact step");
    }
    return r;
  }

  bool is_zero() const { return limbs_.empty(); }

  BigUint& operator+=(const BigUint& o) {
    if (limbs_.size() < o.limbs_.size()) limbs_.resize(o.limbs_.size(), 0);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      unsigned __int128 cur = carry + limbs_[i];
      if (i < o.limbs_.size()) cur += o.limbs_[i];
      limbs_[i] = static_cast<std::uint64_t>(cur);
      carry = cur >> 64;
    }
    if (carry != 0) limbs_.push_back(static_cast<std::uint64_t>(carry));
    return *this;
  }

  BigUint operator+(const BigUint& o) const {
    BigUint r = *this;
    r += o;
    return r;
  }

  BigUint& mul_u64(std::uint64_t m) {
    if (m == 0 || is_zero()) {
      limbs_.clear();
      return *this;
    }
    unsigned __int128 carry = 0;
    for (auto& limb : limbs_) {
      unsigned __int128 cur = static_cast<unsigned __int128>(limb) * m + carry;
      limb = static_cast<std::uint64_t>(cur);
      carry = cur >> 64;
    }
    if (carry != 0) limbs_.push_back(static_cast<std::uint64_t>(carry));
    return *this;
  }

  BigUint operator*(const BigUint& o) const {
    if (is_zero() || o.is_zero()) return BigUint();
    std::vector<std::uint64_t> r(limbs_.size() + o.limbs_.size(), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      unsigned __int128 carry = 0;
      for (std::size_t j = 0; j < o.limbs_.size(); ++j) {
        unsigned __int128 cur = r[i + j] + carry +
            static_cast<unsigned __int128>(limbs_[i]) * o.limbs_[j];
        r[i + j] = static_cast<std::uint64_t>(cur);
        carry = cur >> 64;
      }
      std::size_t k = i + o.limbs_.size();
      while (carry != 0) {
        unsigned __int128 cur = r[k] + carry;
        r[k] = static_cast<std::uint64_t>(cur);
        carry = cur >> 64;
        ++k;
      }
    }
    BigUint out;
    out.limbs_ = std::move(r);
    out.trim();
    return out;
  }

  BigUint& shl(std::uint64_t bits) {
    if (is_zero() || bits == 0) return *this;
    std::size_t words = bits / 64;
    unsigned rem = static_cast<unsigned>(bits % 64);
    if (rem != 0) {
      std::uint64_t carry = 0;
      for (auto& limb : limbs_) {
        std::uint64_t next = limb >> (64 - rem);
        limb = (limb << rem) | carry;
        carry = next;
      }
      if (carry != 0) limbs_.push_back(carry);
    }
    limbs_.insert(limbs_.begin(), words, 0);
    return *this;
  }

  // In-place division by a 64-bit divisor, returns the remainder.
  std::uint64_t divmod_u64(std::uint64_t div) {
    if (div == 0) throw std::invalid_argument("BigUint: division by zero");
    unsigned __int128 rem = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      unsigned __int128 cur = (rem << 64) | limbs_[i];
      limbs_[i] = static_cast<std::uint64_t>(cur / div);
      rem = cur % div;
    }
    trim();
    return static_cast<std::uint64_t>(rem);
  }

  std::strong_ordering operator<=>(const BigUint& o) const {
    if (limbs_.size() != o.limbs_.size())
      return limbs_.size() <=> o.limbs_.size();
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      if (limbs_[i] != o.limbs_[i]) return limbs_[i] <=> o.limbs_[i];
    }
    return std::strong_ordering::equal;
  }
  bool operator==(const BigUint& o) const { return limbs_ == o.limbs_; }

  std::uint64_t to_u64() const {
    if (limbs_.size() > 1) throw std::overflow_error("BigUint: does not fit u64");
    return limbs_.empty() ? 0 : limbs_[0];
  }

  double to_double() const {
    if (limbs_.empty()) return 0.0;
    if (limbs_.size() == 1) return static_cast<double>(limbs_[0]);
    std::size_t n = limbs_.size();
    double top = static_cast<double>(limbs_[n - 1]) * 18446744073709551616.0 +
                 static_cast<double>(limbs_[n - 2]);
    return std::ldexp(top, static_cast<int>(64 * (n - 2)));
  }

  std::string to_string() const {
    if (is_zero()) return "0";
    BigUint tmp = *this;
    std::vector<std::uint64_t> chunks;
    while (!tmp.is_zero()) chunks.push_back(tmp.divmod_u64(10000000000000000000ull));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu",
                  static_cast<unsigned long long>(chunks.back()));
    std::string out = buf;
    for (std::size_t i = chunks.size() - 1; i-- > 0;) {
      std::snprintf(buf, sizeof buf, "%019llu",
                    static_cast<unsigned long long>(chunks[i]));
      out += buf;
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> limbs_;
  void trim() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }
};

}  // namespace qpcube
