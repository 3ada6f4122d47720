#pragma once

#include <cstdint>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace mvq {

// Exact integer/rational types for subspace counting and success
// probabilities. Counts like q^{mn} overflow machine words almost
// immediately, so everything here is arbitrary precision.
using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline BigInt big_pow(const BigInt& base, std::uint64_t e) {
  BigInt acc = 1, b = base;
  while (e) {
    if (e & 1) acc *= b;
    b *= b;
    e >>= 1;
  }
  return acc;
}

// Gaussian binomial (ell choose m)_q: the number of m-dimensional subspaces
// of F_q^ell, computed as prod_{i<m} (q^ell - q^i) / (q^m - q^i).
inline BigInt gaussian_binomial(std::uint64_t ell, std::uint64_t m, std::uint64_t q) {
  if (q < 2) throw std::invalid_argument("counting: q must be at least 2");
  if (m > ell) return 0;
  BigInt num = 1, den = 1;
  const BigInt qe = big_pow(q, ell), qm = big_pow(q, m);
  BigInt qi = 1;
  for (std::uint64_t i = 0; i < m; ++i) {
    num *= qe - qi;
    den *= qm - qi;
    qi *= q;
  }
  return num / den;  // exact: den divides num
}

// Number of rank-r matrices in F_q^{m x n}:
// (n choose r)_q * prod_{i<r} (q^m - q^i).
inline BigInt count_rank_matrices(std::uint64_t m, std::uint64_t n,
                                  std::uint64_t r, std::uint64_t q) {
  if (r > m || r > n) return 0;
  BigInt out = gaussian_binomial(n, r, q);
  const BigInt qm = big_pow(q, m);
  BigInt qi = 1;
  for (std::uint64_t i = 0; i < r; ++i) {
    out *= qm - qi;
    qi *= q;
  }
  return out;
}

}  // namespace mvq
