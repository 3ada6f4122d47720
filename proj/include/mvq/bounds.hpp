#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvq/counting.hpp"
#include "mvq/oracle.hpp"

namespace mvq {

// ---------------------------------------------------------------------------
// Exact optimum for guessing the trace of a hidden n x n matrix over F_q
// after t matrix-vector queries:
//
//     opt(n, q, t) = max_Z |{ s in F_q : rank(Z + s I) <= t }| / q.
//
// Exhaustive mode enumerates every Z (q^(n^2) matrices); witness mode only
// evaluates Z = diag(1, ..., 1, 0, ..., 0) with ceil(n/2) ones, which is the
// maximizer whenever t >= ceil(n/2) over F_2 and still a valid lower bound
// otherwise.
// ---------------------------------------------------------------------------

enum class TraceBoundMode { exhaustive, witness };

struct TraceBound {
  BigRational value;
  bool is_exact;  // exhaustive enumeration ran to completion
};

namespace detail {

inline std::size_t shifted_rank_count(const MatrixFq& z, std::size_t t) {
  const FieldPtr& f = z.field();
  const std::size_t n = z.rows();
  std::size_t count = 0;
  for (std::uint64_t s = 0; s < f->q(); ++s) {
    MatrixFq m = z;
    FieldElem se = f->element(static_cast<std::uint32_t>(s));
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = f->add(m.at(i, i), se);
    if (rank(m) <= t) ++count;
  }
  return count;
}

}  // namespace detail

inline TraceBound trace_opt_success(std::size_t n, std::uint64_t q, std::size_t t,
                                    TraceBoundMode mode = TraceBoundMode::exhaustive,
                                    std::uint64_t enumeration_cap = 1ull << 20) {
  if (n == 0) throw std::invalid_argument("trace bound: n must be positive");
  FieldPtr f = make_field_q(q);
  if (mode == TraceBoundMode::witness) {
    MatrixFq z(f, n, n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) z.at(i, i) = f->one();
    std::size_t c = detail::shifted_rank_count(z, t);
    return {BigRational(std::max<std::size_t>(c, 1), q), false};
  }
  auto space = matrix_space_size(q, n, n, enumeration_cap);
  if (!space)
    throw std::invalid_argument("trace bound: q^(n^2) exceeds the enumeration cap");
  std::size_t best = 1;  // guessing blind already gets one value of s
  for (std::uint64_t idx = 0; idx < *space; ++idx) {
    MatrixFq z = matrix_from_index(f, n, n, idx);
    best = std::max(best, detail::shifted_rank_count(z, t));
  }
  return {BigRational(best, q), true};
}

// ---------------------------------------------------------------------------
// Probability of exactly identifying a uniformly random hidden m x n matrix
// after t queries: only the matrices of rank <= t can be pinned down, so the
// optimum is the fraction of the space they occupy.
// ---------------------------------------------------------------------------

inline BigRational identification_success(std::size_t m, std::size_t n, std::size_t t,
                                          std::uint64_t q) {
  BigInt good = 0;
  for (std::size_t r = 0; r <= std::min({t, m, n}); ++r)
    good += count_rank_matrices(m, n, r, q);
  return BigRational(good, big_pow(BigInt(q), static_cast<std::uint64_t>(m) * n));
}

// ---------------------------------------------------------------------------
// Symmetrized acceptance profile: averages an acceptance probability over
// the rank classes of F_q^(m x n), indexed by nullity d = n - rank. For a
// t-query algorithm the profile is a polynomial of degree <= 2t in q^d,
// which the fit checks below can test against.
// ---------------------------------------------------------------------------

using AcceptanceFn = std::function<double(const MatrixFq&)>;

struct SymmetrizationProfile {
  std::vector<std::size_t> nullities;   // ascending d
  std::vector<double> abscissae;        // q^d
  std::vector<double> values;           // averaged acceptance per class
  std::vector<BigInt> class_sizes;      // exact rank-class cardinalities
  bool exhaustive;
  std::size_t samples_per_class;        // 0 in exhaustive mode
};

inline SymmetrizationProfile symmetrize_acceptance(const FieldPtr& f, std::size_t m,
                                                   std::size_t n, const AcceptanceFn& accept,
                                                   Rng& rng,
                                                   std::uint64_t exhaustive_cap = 1ull << 16,
                                                   std::size_t samples_per_class = 10000) {
  const std::uint64_t q = f->q();
  const std::size_t rmax = std::min(m, n);
  SymmetrizationProfile prof;
  prof.samples_per_class = 0;
  for (std::size_t r = rmax + 1; r-- > 0;) {
    std::size_t d = n - r;
    prof.nullities.push_back(d);
    prof.abscissae.push_back(std::pow(static_cast<double>(q), static_cast<double>(d)));
    prof.class_sizes.push_back(count_rank_matrices(m, n, r, q));
  }

  auto space = matrix_space_size(q, m, n, exhaustive_cap);
  if (space) {
    prof.exhaustive = true;
    std::vector<double> sums(rmax + 1, 0.0);
    std::vector<BigInt> seen(rmax + 1, 0);
    for (std::uint64_t idx = 0; idx < *space; ++idx) {
      MatrixFq mat = matrix_from_index(f, m, n, idx);
      std::size_t d = n - rank(mat);
      std::size_t slot = d - prof.nullities.front();
      sums[slot] += accept(mat);
      seen[slot] += 1;
    }
    for (std::size_t i = 0; i <= rmax; ++i) {
      if (seen[i] != prof.class_sizes[i])
        throw std::logic_error("symmetrize: rank-class sizes disagree with the counting formula");
      prof.values.push_back(sums[i] / prof.class_sizes[i].convert_to<double>());
    }
    return prof;
  }

  prof.exhaustive = false;
  prof.samples_per_class = samples_per_class;
  for (std::size_t i = 0; i <= rmax; ++i) {
    std::size_t r = n - prof.nullities[i];
    double sum = 0.0;
    for (std::size_t s = 0; s < samples_per_class; ++s)
      sum += accept(sample_matrix_of_rank(f, m, n, r, rng));
    prof.values.push_back(sum / static_cast<double>(samples_per_class));
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Least-squares distance from a profile to the space of polynomials of a
// given maximum degree, evaluated on the profile's abscissae. The basis is
// built by Stieltjes orthogonalization on the discrete point set, so the
// conditioning of raw Vandermonde systems never enters. With fewer than
// degree_cap + 2 points any profile fits exactly and the check is vacuous.
// ---------------------------------------------------------------------------

struct DegreeFit {
  double residual;
  std::size_t degree_cap;
  bool vacuous;
  std::vector<double> fitted;
};

inline DegreeFit low_degree_fit_check(const std::vector<double>& xs,
                                      const std::vector<double>& ys,
                                      std::size_t degree_cap) {
  if (xs.size() != ys.size()) throw std::invalid_argument("degree fit: size mismatch");
  const std::size_t k = xs.size();
  DegreeFit out{0.0, degree_cap, k < degree_cap + 2, std::vector<double>(k, 0.0)};
  if (k == 0) return out;

  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += a[i] * b[i];
    return s;
  };

  std::vector<std::vector<double>> basis;
  const std::size_t dims = std::min(degree_cap + 1, k);
  for (std::size_t j = 0; j < dims; ++j) {
    std::vector<double> v(k, 1.0);
    if (j > 0)
      for (std::size_t i = 0; i < k; ++i) v[i] = xs[i] * basis[j - 1][i];
    for (int pass = 0; pass < 2; ++pass)  // two-pass Gram-Schmidt for stability
      for (const auto& b : basis) {
        double c = dot(v, b);
        for (std::size_t i = 0; i < k; ++i) v[i] -= c * b[i];
      }
    double nrm = std::sqrt(dot(v, v));
    if (nrm < 1e-13) throw std::invalid_argument("degree fit: abscissae are degenerate");
    for (double& e : v) e /= nrm;
    basis.push_back(std::move(v));
  }

  for (const auto& b : basis) {
    double c = dot(ys, b);
    for (std::size_t i = 0; i < k; ++i) out.fitted[i] += c * b[i];
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double d = ys[i] - out.fitted[i];
    r2 += d * d;
  }
  out.residual = std::sqrt(std::max(0.0, r2));
  return out;
}

// ---------------------------------------------------------------------------
// Minimal degree for which some polynomial satisfies interval constraints at
// given points, decided exactly: per-point intervals are intersected first,
// then feasibility at each degree is a rational linear program solved by a
// phase-1 simplex with Bland's rule (terminating, no tolerance anywhere).
// A polynomial through any consistent single-point values always exists at
// degree #points - 1, so the search is bounded.
// ---------------------------------------------------------------------------

struct DegreeConstraint {
  BigRational x;
  std::optional<BigRational> lower, upper;
};

struct FeasibleDegree {
  std::optional<std::size_t> degree;  // empty when the constraints are inconsistent
  bool inconsistent;
  std::size_t points;                 // distinct abscissae after merging
};

namespace detail {

struct LinearRow {
  std::vector<BigRational> a;  // over structural variables
  BigRational b;
  bool is_lower;  // a . v >= b when true, a . v <= b otherwise
};

// Phase-1 simplex: every row receives an artificial variable, Bland's rule
// picks pivots, and feasibility is the vanishing of the artificial total.
inline bool rows_feasible(const std::vector<LinearRow>& rows, std::size_t nvars) {
  const std::size_t m = rows.size();
  if (m == 0) return true;
  const std::size_t slack0 = nvars;
  const std::size_t art0 = nvars + m;
  const std::size_t total = art0 + m;

  std::vector<std::vector<BigRational>> t(m, std::vector<BigRational>(total, 0));
  std::vector<BigRational> rhs(m, 0);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < nvars; ++j) t[i][j] = rows[i].a[j];
    t[i][slack0 + i] = rows[i].is_lower ? BigRational(-1) : BigRational(1);
    rhs[i] = rows[i].b;
    if (rhs[i] < 0) {
      for (std::size_t j = 0; j < total; ++j) t[i][j] = -t[i][j];
      rhs[i] = -rhs[i];
    }
    t[i][art0 + i] = 1;
    basis[i] = art0 + i;
  }

  auto artificial_cost = [&](std::size_t col) {
    BigRational d = 0;
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] >= art0) d += t[i][col];
    return d;
  };

  while (true) {
    std::size_t enter = total;
    for (std::size_t j = 0; j < art0; ++j) {
      if (artificial_cost(j) > 0) {
        enter = j;
        break;  // Bland: smallest eligible index
      }
    }
    if (enter == total) break;

    std::size_t leave = m;
    BigRational best = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t[i][enter] <= 0) continue;
      BigRational ratio = rhs[i] / t[i][enter];
      if (leave == m || ratio < best || (ratio == best && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave == m) break;  // unbounded direction cannot happen with artificials basic

    BigRational piv = t[leave][enter];
    for (auto& e : t[leave]) e /= piv;
    rhs[leave] /= piv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == leave || t[i][enter] == 0) continue;
      BigRational c = t[i][enter];
      for (std::size_t j = 0; j < total; ++j) t[i][j] -= c * t[leave][j];
      rhs[i] -= c * rhs[leave];
    }
    basis[leave] = enter;
  }

  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] >= art0 && rhs[i] != 0) return false;
  return true;
}

}  // namespace detail

inline FeasibleDegree min_feasible_degree(const std::vector<DegreeConstraint>& constraints,
                                          std::size_t max_degree = SIZE_MAX) {
  // Merge constraints that share an abscissa and detect empty intervals.
  std::vector<DegreeConstraint> merged;
  for (const auto& c : constraints) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const DegreeConstraint& d) { return d.x == c.x; });
    if (it == merged.end()) {
      merged.push_back(c);
      continue;
    }
    if (c.lower && (!it->lower || *c.lower > *it->lower)) it->lower = c.lower;
    if (c.upper && (!it->upper || *c.upper < *it->upper)) it->upper = c.upper;
  }
  FeasibleDegree out{std::nullopt, false, merged.size()};
  for (const auto& c : merged) {
    if (c.lower && c.upper && *c.lower > *c.upper) {
      out.inconsistent = true;
      return out;
    }
  }
  if (merged.empty()) {
    out.degree = 0;
    return out;
  }

  const std::size_t guaranteed = merged.size() - 1;
  const std::size_t cap = std::min(max_degree, guaranteed);
  for (std::size_t deg = 0; deg <= cap; ++deg) {
    const std::size_t nvars = 2 * (deg + 1);  // coefficients split into +/- parts
    std::vector<detail::LinearRow> rows;
    for (const auto& c : merged) {
      std::vector<BigRational> coeffs(nvars, 0);
      BigRational xp = 1;
      for (std::size_t j = 0; j <= deg; ++j) {
        coeffs[2 * j] = xp;
        coeffs[2 * j + 1] = -xp;
        xp *= c.x;
      }
      if (c.lower) rows.push_back({coeffs, *c.lower, true});
      if (c.upper) rows.push_back({std::move(coeffs), *c.upper, false});
    }
    if (detail::rows_feasible(rows, nvars)) {
      out.degree = deg;
      return out;
    }
  }
  return out;  // max_degree cut the search short of the guaranteed degree
}

// Constraint family for distinguishing low-nullity from high-nullity hidden
// matrices: reject at nullity 0, accept with margin from nullity ceil(n/2)
// up. The optional box clamps the polynomial to [0, 1] at every point, which
// models acceptance probabilities more faithfully but is a strictly harder
// feasibility problem.
inline std::vector<DegreeConstraint> rank_testing_constraints(std::size_t n, std::uint64_t q,
                                                              bool include_box = false) {
  std::vector<DegreeConstraint> cs;
  const BigRational third(1, 3), two_thirds(2, 3);
  for (std::size_t d = 0; d <= n; ++d) {
    DegreeConstraint c;
    c.x = BigRational(big_pow(BigInt(q), d));
    if (d == 0) c.upper = third;
    if (d >= (n + 1) / 2) c.lower = two_thirds;
    if (include_box) {
      // the thresholds already lie inside [0, 1], so only absent bounds tighten
      if (!c.lower) c.lower = BigRational(0);
      if (!c.upper) c.upper = BigRational(1);
    }
    cs.push_back(std::move(c));
  }
  return cs;
}

// ---------------------------------------------------------------------------
// Acceptance functions used by the profile tooling; each one simulates an
// actual circuit so the profiles are measured, not transcribed.
// ---------------------------------------------------------------------------

// Probability that a uniform-superposition probe returns both registers to
// zero: Fourier transform the input register, query once, undo the
// transform, and read the amplitude at |0, 0>.
inline double kernel_probe_acceptance(const MatrixFq& m) {
  OraclePtr o = make_mv_oracle(m, QueryFlavor::standard);
  RegisterLayout layout(m.field(), {m.cols(), m.rows()});
  Label zero(layout.total_symbols(), 0);
  StateVector s = StateVector::basis(layout, zero);
  s.apply_qft(0, false);
  o->apply_standard(s, 0, 1);
  s.apply_qft(0, true);
  Amplitude a = s.amplitude(zero);
  return std::norm(a);
}

// Probability that the two-probe interference guess matches the full trace
// (the guess ignores diagonal entries past the first two, so the match is
// exact only on matrices whose remaining diagonal vanishes). Query cost: 1.
inline double trace_guess_acceptance(const MatrixFq& m) {
  const FieldPtr& f = m.field();
  if (f->q() != 2) throw std::invalid_argument("trace guess: requires q = 2");
  if (m.rows() != m.cols() || m.rows() < 2)
    throw std::invalid_argument("trace guess: needs a square matrix, n >= 2");
  const std::size_t n = m.rows();
  OraclePtr o = make_mv_oracle(m, QueryFlavor::phase);
  RegisterLayout layout(f, {n, n});
  Label b0(2 * n, 0), b1(2 * n, 0);
  b0[0] = 1;
  b0[n] = 1;  // x = y = e_1
  b1[1] = 1;
  b1[n + 1] = 1;  // x = y = e_2
  const Amplitude h{1.0 / std::sqrt(2.0), 0.0};
  StateVector psi = StateVector::from_amplitudes(layout, {{b0, h}, {b1, h}});
  o->apply_phase(psi, 0, 1);
  StateVector plus = StateVector::from_amplitudes(layout, {{b0, h}, {b1, h}});
  StateVector minus = StateVector::from_amplitudes(layout, {{b0, h}, {b1, -h}});

  FieldElem tr = f->zero();
  for (std::size_t i = 0; i < n; ++i) tr = f->add(tr, m.at(i, i));
  const StateVector& match = (tr.v == 0) ? plus : minus;
  return std::norm(StateVector::inner(match, psi));
}

inline AcceptanceFn constant_acceptance(double c) {
  return [c](const MatrixFq&) { return c; };
}

}  // namespace mvq
