#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <numeric>

#include "mvq/linalg.hpp"

using namespace mvq;

namespace {

// Determinant by signed permutation expansion; independent of the
// elimination code under test.
FieldElem brute_determinant(const MatrixFq& m) {
  const Field& f = *m.field();
  const std::size_t n = m.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  FieldElem det = f.zero();
  do {
    std::size_t inversions = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (perm[i] > perm[j]) ++inversions;
    FieldElem term = f.one();
    for (std::size_t i = 0; i < n; ++i) term = f.mul(term, m.at(i, perm[i]));
    det = f.add(det, (inversions % 2) ? f.neg(term) : term);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return det;
}

bool is_rref(const MatrixFq& m, const std::vector<std::size_t>& pivots) {
  const Field& f = *m.field();
  for (std::size_t k = 0; k < pivots.size(); ++k) {
    if (k > 0 && pivots[k] <= pivots[k - 1]) return false;
    if (!(m.at(k, pivots[k]) == f.one())) return false;
    for (std::size_t i = 0; i < m.rows(); ++i)
      if (i != k && m.at(i, pivots[k]).v != 0) return false;
    for (std::size_t j = 0; j < pivots[k]; ++j)
      if (m.at(k, j).v != 0) return false;
  }
  for (std::size_t i = pivots.size(); i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m.at(i, j).v != 0) return false;
  return true;
}

}  // namespace

TEST_CASE("row reduction produces a canonical reduced form") {
  SECTION("hand-checked binary case") {
    FieldPtr f = make_field_q(2);
    MatrixFq m(f, 2, 3);
    m.at(0, 0) = f->one();
    m.at(0, 1) = f->one();
    m.at(1, 0) = f->one();
    m.at(1, 2) = f->one();
    EchelonForm ef = echelon_form(m);
    REQUIRE(ef.rank == 2);
    REQUIRE(ef.pivot_cols == std::vector<std::size_t>{0, 1});
    MatrixFq want(f, 2, 3);
    want.at(0, 0) = f->one();
    want.at(0, 2) = f->one();
    want.at(1, 1) = f->one();
    want.at(1, 2) = f->one();
    REQUIRE(ef.reduced == want);
  }

  SECTION("structural properties on random instances") {
    Rng rng(11);
    for (std::uint64_t q : {2ull, 3ull, 4ull, 9ull}) {
      FieldPtr f = make_field_q(q);
      for (int it = 0; it < 40; ++it) {
        std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
        MatrixFq m = random_matrix(f, rows, cols, rng);
        EchelonForm ef = echelon_form(m);
        REQUIRE(ef.rank == ef.pivot_cols.size());
        REQUIRE(is_rref(ef.reduced, ef.pivot_cols));
        // Idempotence: reducing the reduced form changes nothing.
        REQUIRE(echelon_form(ef.reduced).reduced == ef.reduced);
      }
    }
  }
}

TEST_CASE("determinant matches permutation expansion") {
  SECTION("all two-by-two matrices over F_3") {
    FieldPtr f = make_field_q(3);
    for (std::uint64_t idx = 0; idx < 81; ++idx) {
      MatrixFq m = matrix_from_index(f, 2, 2, idx);
      REQUIRE(determinant(m) == brute_determinant(m));
    }
  }
  SECTION("random larger matrices") {
    Rng rng(23);
    for (std::uint64_t q : {2ull, 3ull, 4ull, 5ull}) {
      FieldPtr f = make_field_q(q);
      for (int it = 0; it < 30; ++it) {
        std::size_t n = 3 + rng.below(2);
        MatrixFq m = random_matrix(f, n, n, rng);
        REQUIRE(determinant(m) == brute_determinant(m));
      }
    }
  }
}

TEST_CASE("inverse round-trips and reports singularity") {
  Rng rng(37);
  for (std::uint64_t q : {2ull, 9ull}) {
    FieldPtr f = make_field_q(q);
    for (int it = 0; it < 25; ++it) {
      std::size_t n = 1 + rng.below(4);
      MatrixFq m = sample_matrix_of_rank(f, n, n, n, rng);
      auto inv = inverse(m);
      REQUIRE(inv.has_value());
      REQUIRE(mul(m, *inv) == MatrixFq::identity(f, n));
      REQUIRE(mul(*inv, m) == MatrixFq::identity(f, n));

      if (n > 1) {
        MatrixFq s = sample_matrix_of_rank(f, n, n, n - 1, rng);
        REQUIRE_FALSE(inverse(s).has_value());
        REQUIRE(determinant(s) == f->zero());
      }
    }
  }
  FieldPtr f2 = make_field_q(2);
  REQUIRE_THROWS_AS(inverse(MatrixFq(f2, 2, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(determinant(MatrixFq(f2, 2, 3)), std::invalid_argument);
}

TEST_CASE("rank is transpose-invariant and submultiplicative") {
  FieldPtr f = make_field_q(2);
  for (std::uint64_t idx = 0; idx < 64; ++idx) {
    MatrixFq m = matrix_from_index(f, 2, 3, idx);
    REQUIRE(rank(m) == rank(m.transpose()));
    REQUIRE(nullity(m) == 3 - rank(m));
  }
  Rng rng(41);
  for (std::uint64_t q : {3ull, 4ull}) {
    FieldPtr fq = make_field_q(q);
    for (int it = 0; it < 30; ++it) {
      MatrixFq a = random_matrix(fq, 3, 4, rng);
      MatrixFq b = random_matrix(fq, 4, 3, rng);
      REQUIRE(rank(mul(a, b)) <= std::min(rank(a), rank(b)));
    }
    REQUIRE(rank(MatrixFq::identity(fq, 4)) == 4);
  }
}

TEST_CASE("null space basis spans exactly the kernel") {
  FieldPtr f = make_field_q(2);
  for (std::uint64_t idx = 0; idx < 512; ++idx) {
    MatrixFq m = matrix_from_index(f, 3, 3, idx);
    auto basis = null_space_basis(m);
    REQUIRE(basis.size() == nullity(m));
    for (const auto& v : basis)
      REQUIRE(mul(m, v) == VectorFq(f, 3));
    if (!basis.empty()) {
      MatrixFq stack(f, basis.size(), 3);
      for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) stack.at(i, j) = basis[i][j];
      REQUIRE(rank(stack) == basis.size());
    }
  }
}

TEST_CASE("linear systems solve or prove inconsistency") {
  SECTION("consistent systems verify") {
    Rng rng(53);
    for (std::uint64_t q : {2ull, 3ull, 5ull}) {
      FieldPtr f = make_field_q(q);
      for (int it = 0; it < 40; ++it) {
        std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
        MatrixFq a = random_matrix(f, rows, cols, rng);
        VectorFq x0 = random_vector(f, cols, rng);
        VectorFq b = mul(a, x0);
        auto sol = solve(a, b);
        REQUIRE(sol.has_value());
        REQUIRE(mul(a, sol->particular) == b);
        for (const auto& v : sol->null_basis) REQUIRE(mul(a, v) == VectorFq(f, rows));
      }
    }
  }
  SECTION("verdicts agree with exhaustive search") {
    FieldPtr f = make_field_q(2);
    Rng rng(59);
    for (int it = 0; it < 200; ++it) {
      MatrixFq a = random_matrix(f, 3, 3, rng);
      VectorFq b = random_vector(f, 3, rng);
      bool solvable = false;
      for (std::uint64_t xv = 0; xv < 8 && !solvable; ++xv) {
        VectorFq x(f, 3);
        for (std::size_t j = 0; j < 3; ++j) x[j] = FieldElem{std::uint32_t(xv >> j) & 1u};
        solvable = mul(a, x) == b;
      }
      REQUIRE(solve(a, b).has_value() == solvable);
    }
  }
}

TEST_CASE("rank-stratum sampling delivers the requested rank") {
  Rng rng(61);
  for (std::uint64_t q : {2ull, 3ull}) {
    FieldPtr f = make_field_q(q);
    for (std::size_t rows = 1; rows <= 4; ++rows)
      for (std::size_t cols = 1; cols <= 4; ++cols)
        for (std::size_t r = 0; r <= std::min(rows, cols); ++r)
          for (int it = 0; it < 5; ++it)
            REQUIRE(rank(sample_matrix_of_rank(f, rows, cols, r, rng)) == r);
    REQUIRE_THROWS_AS(sample_matrix_of_rank(f, 2, 3, 3, rng), std::invalid_argument);
  }
}

TEST_CASE("rank-stratum sampling is close to uniform") {
  // The nine rank-1 binary 2x2 matrices should be hit evenly; a chi-square
  // statistic far above the 8-degree tail would expose a skewed sampler.
  FieldPtr f = make_field_q(2);
  Rng rng(67);
  std::map<std::uint64_t, std::size_t> freq;
  const std::size_t draws = 9000;
  for (std::size_t i = 0; i < draws; ++i) {
    MatrixFq m = sample_matrix_of_rank(f, 2, 2, 1, rng);
    std::uint64_t key = 0;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) key = key * 2 + m.at(r, c).v;
    freq[key]++;
  }
  REQUIRE(freq.size() == 9);
  double chi2 = 0.0, expect = draws / 9.0;
  for (const auto& [key, count] : freq) {
    double d = double(count) - expect;
    chi2 += d * d / expect;
  }
  REQUIRE(chi2 < 26.0);  // p ~ 1e-3 tail for 8 degrees of freedom
}

TEST_CASE("matrix index enumeration is a bijection") {
  FieldPtr f = make_field_q(3);
  std::map<std::vector<std::uint32_t>, std::uint64_t> seen;
  for (std::uint64_t idx = 0; idx < 81; ++idx) {
    MatrixFq m = matrix_from_index(f, 2, 2, idx);
    std::vector<std::uint32_t> key;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) key.push_back(m.at(i, j).v);
    REQUIRE(seen.emplace(std::move(key), idx).second);
  }
  REQUIRE(seen.size() == 81);

  REQUIRE(matrix_space_size(2, 3, 3) == 512);
  REQUIRE(matrix_space_size(2, 8, 8, 1ull << 16) == std::nullopt);
  REQUIRE(matrix_space_size(65536, 4, 4) == std::nullopt);  // overflows 64 bits
}

TEST_CASE("vector helpers and field mismatch guards") {
  FieldPtr f2 = make_field_q(2);
  FieldPtr f4 = make_field_q(4);
  VectorFq u = unit_vector(f2, 3, 1);
  REQUIRE(u[0].v == 0);
  REQUIRE(u[1].v == 1);
  REQUIRE(dot(u, ones_vector(f2, 3)) == f2->one());
  REQUIRE_THROWS_AS(dot(u, ones_vector(f4, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(dot(u, ones_vector(f2, 2)), std::invalid_argument);
  REQUIRE_THROWS_AS(mul(MatrixFq(f2, 2, 2), ones_vector(f2, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(add(MatrixFq(f2, 2, 2), MatrixFq(f2, 2, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(mul(MatrixFq(f2, 2, 2), MatrixFq(f4, 2, 2)), std::invalid_argument);

  // scalar_mul distributes over matrix addition.
  Rng rng(71);
  MatrixFq a = random_matrix(f4, 2, 3, rng), b = random_matrix(f4, 2, 3, rng);
  FieldElem s{2};
  REQUIRE(scalar_mul(s, add(a, b)) == add(scalar_mul(s, a), scalar_mul(s, b)));
}
