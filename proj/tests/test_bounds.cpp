#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "mvq/bounds.hpp"

using namespace mvq;

namespace {

// Exact 3x3 determinant over rationals, for the normal-equations cross-check.
BigRational det3(const std::array<std::array<BigRational, 3>, 3>& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

}  // namespace

TEST_CASE("optimal trace-guess probability over binary fields") {
  SECTION("below half the dimension the optimum is exactly one half") {
    for (std::size_t n = 2; n <= 4; ++n)
      for (std::size_t t = 0; 2 * t < n; ++t) {
        TraceBound b = trace_opt_success(n, 2, t);
        REQUIRE(b.is_exact);
        REQUIRE(b.value == BigRational(1, 2));
      }
  }
  SECTION("from half the dimension on the optimum is one") {
    REQUIRE(trace_opt_success(2, 2, 1).value == BigRational(1));
    REQUIRE(trace_opt_success(3, 2, 2).value == BigRational(1));
    REQUIRE(trace_opt_success(4, 2, 2).value == BigRational(1));
  }
  SECTION("ternary field spot value") {
    TraceBound b = trace_opt_success(3, 3, 1);
    REQUIRE(b.is_exact);
    REQUIRE(b.value == BigRational(1, 3));
  }
  SECTION("witness mode lower-bounds the exhaustive optimum") {
    TraceBound w = trace_opt_success(4, 2, 2, TraceBoundMode::witness);
    TraceBound e = trace_opt_success(4, 2, 2);
    REQUIRE_FALSE(w.is_exact);
    REQUIRE(w.value == e.value);  // the half-identity witness is the maximizer here
  }
  SECTION("enumeration cap throws, witness mode still answers") {
    REQUIRE_THROWS_AS(trace_opt_success(5, 2, 1), std::invalid_argument);
    TraceBound w = trace_opt_success(5, 2, 1, TraceBoundMode::witness);
    REQUIRE(w.value == BigRational(1, 2));
    REQUIRE_FALSE(w.is_exact);
  }
  SECTION("monotone in the query budget") {
    BigRational prev(0);
    for (std::size_t t = 0; t <= 3; ++t) {
      BigRational cur = trace_opt_success(3, 2, t).value;
      REQUIRE(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("exact identification probability") {
  REQUIRE(identification_success(2, 2, 0, 2) == BigRational(1, 16));
  REQUIRE(identification_success(2, 2, 1, 2) == BigRational(10, 16));
  REQUIRE(identification_success(2, 2, 2, 2) == BigRational(1));
  SECTION("transpose symmetry and saturation") {
    for (std::uint64_t q : {2ull, 3ull, 4ull})
      for (std::size_t t = 0; t <= 3; ++t)
        REQUIRE(identification_success(2, 3, t, q) == identification_success(3, 2, t, q));
    REQUIRE(identification_success(3, 5, 3, 3) == BigRational(1));
    REQUIRE(identification_success(3, 5, 7, 3) == BigRational(1));
  }
}

TEST_CASE("kernel probe accepts with probability q^(-2 rank)") {
  SECTION("every binary two-by-two matrix") {
    FieldPtr f = make_field_q(2);
    for (std::uint64_t idx = 0; idx < 16; ++idx) {
      MatrixFq m = matrix_from_index(f, 2, 2, idx);
      double expect = std::pow(2.0, -2.0 * double(rank(m)));
      REQUIRE(std::abs(kernel_probe_acceptance(m) - expect) < 1e-12);
    }
  }
  SECTION("ternary spot check and random instances") {
    FieldPtr f3 = make_field_q(3);
    MatrixFq m(f3, 2, 2);
    m.at(0, 0) = f3->one();
    REQUIRE(std::abs(kernel_probe_acceptance(m) - 1.0 / 9.0) < 1e-12);

    FieldPtr f = make_field_q(2);
    Rng rng(311);
    for (int it = 0; it < 20; ++it) {
      MatrixFq r = random_matrix(f, 3, 3, rng);
      double expect = std::pow(2.0, -2.0 * double(rank(r)));
      REQUIRE(std::abs(kernel_probe_acceptance(r) - expect) < 1e-12);
    }
  }
}

TEST_CASE("symmetrized kernel-probe profile over all binary 3x3 matrices") {
  FieldPtr f = make_field_q(2);
  Rng rng(313);
  SymmetrizationProfile p = symmetrize_acceptance(f, 3, 3, kernel_probe_acceptance, rng);
  REQUIRE(p.exhaustive);
  REQUIRE(p.samples_per_class == 0);
  REQUIRE(p.nullities == std::vector<std::size_t>{0, 1, 2, 3});
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(p.abscissae[i] == std::pow(2.0, double(p.nullities[i])));
    std::size_t r = 3 - p.nullities[i];
    REQUIRE(p.class_sizes[i] == count_rank_matrices(3, 3, r, 2));
    REQUIRE(std::abs(p.values[i] - std::pow(2.0, -2.0 * double(r))) < 1e-12);
  }

  SECTION("the profile is the monomial (x/q^n)^2, so degree two fits exactly") {
    DegreeFit fit2 = low_degree_fit_check(p.abscissae, p.values, 2);
    REQUIRE_FALSE(fit2.vacuous);
    REQUIRE(fit2.residual < 1e-12);
    DegreeFit fit1 = low_degree_fit_check(p.abscissae, p.values, 1);
    REQUIRE(fit1.residual > 1e-3);  // a line cannot carry the quadratic profile
  }
}

TEST_CASE("sampled symmetrization stays near the exact profile") {
  FieldPtr f = make_field_q(2);
  Rng rng(317);
  SymmetrizationProfile p =
      symmetrize_acceptance(f, 3, 3, kernel_probe_acceptance, rng, /*exhaustive_cap=*/1,
                            /*samples_per_class=*/2000);
  REQUIRE_FALSE(p.exhaustive);
  REQUIRE(p.samples_per_class == 2000);
  for (std::size_t i = 0; i < 4; ++i) {
    double exact = std::pow(2.0, -2.0 * double(3 - p.nullities[i]));
    REQUIRE(std::abs(p.values[i] - exact) < 5.0 / std::sqrt(2000.0));
  }
  Rng rng2(317);
  SymmetrizationProfile q =
      symmetrize_acceptance(f, 3, 3, kernel_probe_acceptance, rng2, 1, 2000);
  REQUIRE(q.values == p.values);  // same seed, same profile
}

TEST_CASE("trace-guess acceptance symmetrizes to a line in q^d") {
  // For a 3x3 binary matrix the guess matches exactly when the unprobed
  // diagonal entry vanishes; averaging that indicator over rank classes
  // gives (17 + 4 q^d) / 49 at nullity d, hence even a degree-one fit.
  FieldPtr f = make_field_q(2);
  Rng rng(331);
  SymmetrizationProfile p = symmetrize_acceptance(f, 3, 3, trace_guess_acceptance, rng);
  REQUIRE(p.exhaustive);
  std::array<double, 4> expect{21.0 / 49.0, 25.0 / 49.0, 33.0 / 49.0, 1.0};
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::abs(p.values[i] - expect[i]) < 1e-12);
  REQUIRE(low_degree_fit_check(p.abscissae, p.values, 2).residual < 1e-10);
  REQUIRE(low_degree_fit_check(p.abscissae, p.values, 1).residual < 1e-10);

  SECTION("domain guards") {
    REQUIRE_THROWS_AS(trace_guess_acceptance(MatrixFq(make_field_q(3), 2, 2)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(trace_guess_acceptance(MatrixFq(f, 1, 1)), std::invalid_argument);
    REQUIRE_THROWS_AS(trace_guess_acceptance(MatrixFq(f, 2, 3)), std::invalid_argument);
  }
}

TEST_CASE("constant acceptance symmetrizes to degree zero") {
  FieldPtr f = make_field_q(2);
  Rng rng(337);
  SymmetrizationProfile p = symmetrize_acceptance(f, 2, 2, constant_acceptance(0.37), rng);
  for (double v : p.values) REQUIRE(v == Catch::Approx(0.37).epsilon(1e-12));
  REQUIRE(low_degree_fit_check(p.abscissae, p.values, 0).residual < 1e-12);
}

TEST_CASE("low-degree fit distinguishes polynomial from adversarial data") {
  std::vector<double> xs{1, 2, 4, 8, 16};
  SECTION("an exact quadratic leaves no residual") {
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 - 2.0 * x + 0.5 * x * x);
    DegreeFit fit = low_degree_fit_check(xs, ys, 2);
    REQUIRE_FALSE(fit.vacuous);
    REQUIRE(fit.residual < 1e-10);
    for (std::size_t i = 0; i < xs.size(); ++i)
      REQUIRE(std::abs(fit.fitted[i] - ys[i]) < 1e-10);
    REQUIRE(low_degree_fit_check(xs, ys, 1).residual > 0.05);
  }
  SECTION("alternating data is far from every quadratic") {
    std::vector<double> ys{1, 0, 1, 0, 1};
    DegreeFit fit = low_degree_fit_check(xs, ys, 2);
    REQUIRE(fit.residual > 0.05);

    // Cross-check against the normal equations solved in exact arithmetic.
    std::array<std::array<BigRational, 3>, 3> g{};
    std::array<BigRational, 3> rhs{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      BigRational x(static_cast<long long>(xs[i])), y(static_cast<long long>(ys[i]));
      std::array<BigRational, 3> pw{BigRational(1), x, x * x};
      for (int a = 0; a < 3; ++a) {
        rhs[a] += pw[a] * y;
        for (int b = 0; b < 3; ++b) g[a][b] += pw[a] * pw[b];
      }
    }
    BigRational d = det3(g);
    REQUIRE(d != 0);
    std::array<BigRational, 3> coef;
    for (int c = 0; c < 3; ++c) {
      auto gc = g;
      for (int a = 0; a < 3; ++a) gc[a][c] = rhs[a];
      coef[c] = det3(gc) / d;
    }
    BigRational r2(0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      BigRational x(static_cast<long long>(xs[i]));
      BigRational e = BigRational(static_cast<long long>(ys[i])) -
                      (coef[0] + coef[1] * x + coef[2] * x * x);
      r2 += e * e;
    }
    double exact = std::sqrt(r2.convert_to<double>());
    REQUIRE(std::abs(fit.residual - exact) < 1e-9 * std::max(1.0, exact));
  }
  SECTION("too few points make the check vacuous") {
    DegreeFit fit = low_degree_fit_check({1, 2, 4}, {5, 9, 2}, 2);
    REQUIRE(fit.vacuous);
    REQUIRE(fit.residual < 1e-10);  // three basis dims interpolate three points
  }
  SECTION("degenerate abscissae and shape mismatches are rejected") {
    REQUIRE_THROWS_AS(low_degree_fit_check({1, 1, 2}, {0, 0, 0}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(low_degree_fit_check({1, 2}, {0, 0, 0}, 1), std::invalid_argument);
  }
}

TEST_CASE("minimal feasible degree for threshold constraints") {
  SECTION("separating nullity zero from high nullity takes a line") {
    FeasibleDegree d2 = min_feasible_degree(rank_testing_constraints(2, 2));
    REQUIRE(d2.degree == 1);
    REQUIRE(d2.points == 3);
    REQUIRE_FALSE(d2.inconsistent);
    FeasibleDegree d4 = min_feasible_degree(rank_testing_constraints(4, 2));
    REQUIRE(d4.degree == 1);
  }
  SECTION("clamping to the unit interval forces degree two") {
    FeasibleDegree d = min_feasible_degree(rank_testing_constraints(4, 2, true));
    REQUIRE(d.degree == 2);
  }
  SECTION("empty intervals are flagged, not searched") {
    std::vector<DegreeConstraint> cs{{BigRational(1), BigRational(2, 3), BigRational(1, 3)}};
    FeasibleDegree d = min_feasible_degree(cs);
    REQUIRE(d.inconsistent);
    REQUIRE_FALSE(d.degree.has_value());
  }
  SECTION("a degree cap can cut the search short without inconsistency") {
    FeasibleDegree d = min_feasible_degree(rank_testing_constraints(2, 2), 0);
    REQUIRE_FALSE(d.degree.has_value());
    REQUIRE_FALSE(d.inconsistent);
  }
  SECTION("boxes alone and single points sit at degree zero") {
    std::vector<DegreeConstraint> box{{BigRational(1), BigRational(0), BigRational(1)},
                                      {BigRational(2), BigRational(0), BigRational(1)}};
    REQUIRE(min_feasible_degree(box).degree == 0);
    std::vector<DegreeConstraint> pt{{BigRational(5), BigRational(1, 2), BigRational(1, 2)}};
    REQUIRE(min_feasible_degree(pt).degree == 0);
    REQUIRE(min_feasible_degree({}).degree == 0);
  }
  SECTION("duplicate abscissae merge before the search") {
    std::vector<DegreeConstraint> cs{{BigRational(1), BigRational(1, 4), std::nullopt},
                                     {BigRational(1), std::nullopt, BigRational(3, 4)},
                                     {BigRational(2), BigRational(1, 2), BigRational(1, 2)}};
    FeasibleDegree d = min_feasible_degree(cs);
    REQUIRE(d.points == 2);
    REQUIRE(d.degree == 0);  // the constant 1/2 satisfies everything
  }
}

TEST_CASE("threshold constraint family has the advertised shape") {
  auto cs = rank_testing_constraints(4, 2);
  REQUIRE(cs.size() == 5);
  REQUIRE(cs[0].x == BigRational(1));
  REQUIRE(cs[4].x == BigRational(16));
  REQUIRE(cs[0].upper == BigRational(1, 3));
  REQUIRE_FALSE(cs[0].lower.has_value());
  REQUIRE_FALSE(cs[1].lower.has_value());
  REQUIRE_FALSE(cs[1].upper.has_value());
  for (std::size_t d = 2; d <= 4; ++d) REQUIRE(cs[d].lower == BigRational(2, 3));

  auto boxed = rank_testing_constraints(4, 2, true);
  REQUIRE(boxed[0].lower == BigRational(0));
  REQUIRE(boxed[0].upper == BigRational(1, 3));  // existing bounds survive the box
  REQUIRE(boxed[2].lower == BigRational(2, 3));
  REQUIRE(boxed[2].upper == BigRational(1));
}
