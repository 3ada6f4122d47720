#pragma once

#include <algorithm>
#include <complex>
#include <compare>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvq {

// Element of F_q encoded as an integer in [0, q): the little-endian base-p
// digits of the value are the polynomial-basis coefficients (c0, c1, ...).
struct FieldElem {
  std::uint32_t v = 0;
  friend auto operator<=>(FieldElem, FieldElem) = default;
};

// F_q = F_p[x]/(modulus), q = p^r, in an explicit polynomial basis.
// Multiplication runs through generator exp/log tables built at
// construction; addition is digit-wise mod p.
class Field {
 public:
  static constexpr std::uint64_t kDefaultMaxQ = 1ull << 16;

  Field(std::uint32_t p, std::uint32_t r,
        std::vector<std::uint32_t> modulus = {},
        std::uint64_t max_q = kDefaultMaxQ) {
    if (p < 2 || !is_prime(p)) throw std::invalid_argument("field: p must be prime");
    if (r < 1) throw std::invalid_argument("field: r must be >= 1");
    p_ = p;
    r_ = r;
    std::uint64_t q = 1;
    for (std::uint32_t i = 0; i < r; ++i) {
      q *= p;
      if (q > max_q) throw std::invalid_argument("field: q exceeds size cap");
    }
    q_ = static_cast<std::uint32_t>(q);

    if (modulus.empty()) modulus = builtin_modulus(p, r);
    if (modulus.size() != r + 1)
      throw std::invalid_argument("field: modulus must have degree r");
    for (auto c : modulus)
      if (c >= p) throw std::invalid_argument("field: modulus coefficient out of range");
    if (modulus[r] == 0)
      throw std::invalid_argument("field: modulus leading coefficient is zero");
    // Normalize to monic.
    if (modulus[r] != 1) {
      std::uint32_t lead_inv = mod_inverse(modulus[r], p);
      for (auto& c : modulus) c = static_cast<std::uint32_t>((std::uint64_t(c) * lead_inv) % p);
    }
    if (!is_irreducible(modulus)) throw std::invalid_argument("field: modulus is reducible");
    modulus_ = std::move(modulus);

    build_tables();
  }

  std::uint32_t p() const { return p_; }
  std::uint32_t r() const { return r_; }
  std::uint32_t q() const { return q_; }
  const std::vector<std::uint32_t>& modulus() const { return modulus_; }

  FieldElem zero() const { return FieldElem{0}; }
  FieldElem one() const { return FieldElem{1}; }

  FieldElem element(std::uint32_t value) const {
    if (value >= q_) throw std::invalid_argument("field: element value out of range");
    return FieldElem{value};
  }

  std::vector<std::uint32_t> coeffs(FieldElem a) const {
    std::vector<std::uint32_t> c(r_);
    std::uint32_t v = a.v;
    for (std::uint32_t i = 0; i < r_; ++i) {
      c[i] = v % p_;
      v /= p_;
    }
    return c;
  }

  FieldElem from_coeffs(const std::vector<std::uint32_t>& c) const {
    if (c.size() > r_) throw std::invalid_argument("field: too many coefficients");
    std::uint32_t v = 0;
    for (std::size_t i = c.size(); i-- > 0;) {
      if (c[i] >= p_) throw std::invalid_argument("field: coefficient out of range");
      v = v * p_ + c[i];
    }
    return FieldElem{v};
  }

  FieldElem add(FieldElem a, FieldElem b) const {
    if (p_ == 2) return FieldElem{a.v ^ b.v};
    std::uint32_t out = 0, mul = 1, x = a.v, y = b.v;
    for (std::uint32_t i = 0; i < r_; ++i) {
      out += ((x + y) % p_) * mul;
      x /= p_;
      y /= p_;
      mul *= p_;
    }
    return FieldElem{out};
  }

  FieldElem neg(FieldElem a) const {
    if (p_ == 2) return a;
    std::uint32_t out = 0, mul = 1, x = a.v;
    for (std::uint32_t i = 0; i < r_; ++i) {
      std::uint32_t d = x % p_;
      out += (d == 0 ? 0 : p_ - d) * mul;
      x /= p_;
      mul *= p_;
    }
    return FieldElem{out};
  }

  FieldElem sub(FieldElem a, FieldElem b) const { return add(a, neg(b)); }

  FieldElem mul(FieldElem a, FieldElem b) const {
    if (a.v == 0 || b.v == 0) return FieldElem{0};
    return FieldElem{exp_[log_[a.v] + log_[b.v]]};
  }

  FieldElem inv(FieldElem a) const {
    if (a.v == 0) throw std::domain_error("field: inverse of zero");
    return FieldElem{exp_[q_ - 1 - log_[a.v]]};
  }

  FieldElem pow(FieldElem a, std::uint64_t e) const {
    if (a.v == 0) return e == 0 ? one() : zero();
    std::uint64_t k = (std::uint64_t(log_[a.v]) * (e % (q_ - 1))) % (q_ - 1);
    return FieldElem{exp_[k]};
  }

  // Tr(z) = z + z^p + ... + z^{p^(r-1)}, landing in the prime subfield;
  // returned as the residue in [0, p).
  std::uint32_t trace_to_prime(FieldElem z) const { return trace_[z.v]; }

  // Additive character e(z) = exp(2*pi*i * Tr(z) / p).
  std::complex<double> char_e(FieldElem z) const { return char_[z.v]; }

  bool same_as(const Field& o) const {
    return p_ == o.p_ && r_ == o.r_ && modulus_ == o.modulus_;
  }

  std::string name() const {
    std::string s = "F" + std::to_string(q_);
    if (r_ > 1) {
      s += " (mod";
      for (auto c : modulus_) s += " " + std::to_string(c);
      s += ")";
    }
    return s;
  }

 private:
  static bool is_prime(std::uint32_t n) {
    if (n < 2) return false;
    for (std::uint32_t d = 2; d * d <= n; ++d)
      if (n % d == 0) return false;
    return true;
  }

  static std::uint32_t mod_inverse(std::uint32_t a, std::uint32_t p) {
    // Fermat; p prime, a nonzero mod p.
    std::uint64_t base = a % p, acc = 1, e = p - 2;
    while (e) {
      if (e & 1) acc = acc * base % p;
      base = base * base % p;
      e >>= 1;
    }
    return static_cast<std::uint32_t>(acc);
  }

  static std::vector<std::uint32_t> builtin_modulus(std::uint32_t p, std::uint32_t r) {
    if (r == 1) return {0, 1};  // x
    if (p == 2 && r == 2) return {1, 1, 1};        // x^2+x+1
    if (p == 2 && r == 3) return {1, 1, 0, 1};     // x^3+x+1
    if (p == 2 && r == 4) return {1, 1, 0, 0, 1};  // x^4+x+1
    if (p == 3 && r == 2) return {1, 0, 1};        // x^2+1
    if (p == 3 && r == 3) return {1, 2, 0, 1};     // x^3+2x+1
    if (p == 5 && r == 2) return {2, 0, 1};        // x^2+2
    throw std::invalid_argument(
        "field: no built-in modulus for p=" + std::to_string(p) +
        ", r=" + std::to_string(r) + "; supply one explicitly");
  }

  // Polynomial product of encoded elements reduced mod (monic) modulus.
  // Used only while building the tables.
  std::uint32_t mul_poly(std::uint32_t a, std::uint32_t b) const {
    std::vector<std::uint32_t> da(r_), db(r_), prod(2 * r_ - 1, 0);
    for (std::uint32_t i = 0; i < r_; ++i) {
      da[i] = a % p_;
      a /= p_;
      db[i] = b % p_;
      b /= p_;
    }
    for (std::uint32_t i = 0; i < r_; ++i)
      for (std::uint32_t j = 0; j < r_; ++j)
        prod[i + j] = (prod[i + j] + da[i] * db[j]) % p_;
    for (std::uint32_t d = 2 * r_ - 2; d + 1 > r_; --d) {
      std::uint32_t c = prod[d];
      if (c == 0) continue;
      prod[d] = 0;
      for (std::uint32_t j = 0; j < r_; ++j) {
        std::uint32_t s = (c * modulus_[j]) % p_;
        prod[d - r_ + j] = (prod[d - r_ + j] + p_ - s) % p_;
      }
    }
    std::uint32_t out = 0;
    for (std::uint32_t i = r_; i-- > 0;) out = out * p_ + prod[i];
    return out;
  }

  bool is_irreducible(const std::vector<std::uint32_t>& mod) const {
    if (r_ == 1) return true;
    // Trial division by every monic polynomial of degree 1..r/2.
    for (std::uint32_t d = 1; 2 * d <= r_; ++d) {
      std::uint64_t count = 1;
      for (std::uint32_t i = 0; i < d; ++i) count *= p_;
      for (std::uint64_t idx = 0; idx < count; ++idx) {
        std::vector<std::uint32_t> g(d + 1);
        std::uint64_t v = idx;
        for (std::uint32_t i = 0; i < d; ++i) {
          g[i] = static_cast<std::uint32_t>(v % p_);
          v /= p_;
        }
        g[d] = 1;
        if (divides(g, mod)) return false;
      }
    }
    return true;
  }

  bool divides(const std::vector<std::uint32_t>& g,
               const std::vector<std::uint32_t>& f) const {
    std::vector<std::uint32_t> rem(f);
    std::size_t dg = g.size() - 1;
    while (rem.size() > dg) {
      std::uint32_t lead = rem.back();
      if (lead != 0) {
        std::size_t shift = rem.size() - 1 - dg;
        for (std::size_t j = 0; j <= dg; ++j) {
          std::uint32_t s = (lead * g[j]) % p_;
          rem[shift + j] = (rem[shift + j] + p_ - s) % p_;
        }
      }
      rem.pop_back();
    }
    return std::all_of(rem.begin(), rem.end(), [](std::uint32_t c) { return c == 0; });
  }

  void build_tables() {
    exp_.assign(2 * (q_ - 1), 1);
    log_.assign(q_, 0);
    if (q_ > 2) {
      std::uint32_t gen = 0;
      for (std::uint32_t cand = 2; cand < q_; ++cand) {
        std::uint32_t t = 1, order = 0;
        do {
          t = mul_poly(t, cand);
          ++order;
        } while (t != 1);
        if (order == q_ - 1) {
          gen = cand;
          break;
        }
      }
      if (gen == 0) throw std::logic_error("field: no generator found");
      std::uint32_t t = 1;
      for (std::uint32_t k = 0; k < q_ - 1; ++k) {
        exp_[k] = t;
        log_[t] = k;
        t = mul_poly(t, gen);
      }
      for (std::uint32_t k = 0; k < q_ - 1; ++k) exp_[q_ - 1 + k] = exp_[k];
    }

    trace_.assign(q_, 0);
    char_.assign(q_, {1.0, 0.0});
    for (std::uint32_t v = 0; v < q_; ++v) {
      std::uint32_t acc = v;
      std::uint32_t t = v;
      for (std::uint32_t i = 1; i < r_; ++i) {
        // t <- t^p via table pow
        FieldElem tp = pow(FieldElem{t}, p_);
        t = tp.v;
        acc = add(FieldElem{acc}, FieldElem{t}).v;
      }
      if (acc >= p_) throw std::logic_error("field: trace left the prime subfield");
      trace_[v] = acc;
      char_[v] = std::polar(1.0, 2.0 * std::numbers::pi * double(acc) / double(p_));
    }
  }

  std::uint32_t p_ = 0, r_ = 0, q_ = 0;
  std::vector<std::uint32_t> modulus_;
  std::vector<std::uint32_t> exp_, log_;
  std::vector<std::uint32_t> trace_;
  std::vector<std::complex<double>> char_;
};

using FieldPtr = std::shared_ptr<const Field>;

inline FieldPtr make_field(std::uint32_t p, std::uint32_t r,
                           std::vector<std::uint32_t> modulus = {},
                           std::uint64_t max_q = Field::kDefaultMaxQ) {
  return std::make_shared<Field>(p, r, std::move(modulus), max_q);
}

// Factor q into (p, r) with p prime; rejects non-prime-powers.
inline std::pair<std::uint32_t, std::uint32_t> prime_power_split(std::uint64_t q) {
  if (q < 2) throw std::invalid_argument("field: q must be at least 2");
  std::uint64_t p = 0;
  for (std::uint64_t d = 2; d * d <= q; ++d) {
    if (q % d == 0) {
      p = d;
      break;
    }
  }
  if (p == 0) return {static_cast<std::uint32_t>(q), 1};
  std::uint32_t r = 0;
  std::uint64_t rest = q;
  while (rest % p == 0) {
    rest /= p;
    ++r;
  }
  if (rest != 1) throw std::invalid_argument("field: q is not a prime power");
  return {static_cast<std::uint32_t>(p), r};
}

// Convenience: field of order q via built-in modulus table.
inline FieldPtr make_field_q(std::uint64_t q,
                             std::vector<std::uint32_t> modulus = {}) {
  auto [p, r] = prime_power_split(q);
  return make_field(p, r, std::move(modulus));
}

}  // namespace mvq
