#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvq/oracle.hpp"

namespace mvq {

inline std::size_t ceil_log2(std::size_t n) {
  std::size_t bits = 0;
  for (std::size_t v = 1; v < n; v <<= 1) ++bits;
  return bits;
}

// ---------------------------------------------------------------------------
// Trace of a hidden binary matrix in ceil(n/2) quantum queries.
//
// Two batches of diagonal probes share the query budget: a uniform
// superposition of (x_i = y_i = e_i : i <= l) and (x_i = y_i = e_{l+i}),
// hit with l phase queries, picks up the relative phase (-1)^{tr M} between
// the branches, which one two-outcome measurement reads off exactly. Odd n
// is handled by extending each probe register with a one-symbol pad, which
// simulates the same oracle on a matrix padded with a zero row and column
// (the pads are never touched, so tr is unchanged and queries are free).
// ---------------------------------------------------------------------------

struct TraceResult {
  FieldElem value;
  double probability;       // of the observed measurement outcome; 1 up to tolerance
  std::uint64_t queries_used;
};

inline TraceResult quantum_trace_f2(const OraclePtr& o, Rng& rng) {
  const FieldPtr& f = o->field();
  if (f->q() != 2) throw std::invalid_argument("trace: algorithm requires q = 2");
  if (o->rows() != o->cols()) throw std::invalid_argument("trace: matrix must be square");
  if (o->kind() == OracleKind::vmv)
    throw std::invalid_argument("trace: needs matrix-vector access");
  const std::size_t n = o->rows();
  if (n == 0) throw std::invalid_argument("trace: empty matrix");
  const std::size_t ell = (n + 1) / 2;
  const bool padded = (n % 2) != 0;

  std::vector<std::size_t> sizes;
  for (std::size_t slot = 0; slot < 2 * ell; ++slot) {
    sizes.push_back(n);
    if (padded) sizes.push_back(1);
  }
  RegisterLayout layout(f, std::move(sizes));
  auto main_reg = [&](std::size_t slot) { return padded ? 2 * slot : slot; };

  // Probe k = 1..2l selects e_k of the (possibly padded) space; k = n+1 lands
  // entirely in the pad symbol.
  auto set_unit = [&](Label& l, std::size_t slot, std::size_t k) {
    if (k <= n)
      l[layout.offset(main_reg(slot)) + (k - 1)] = 1;
    else
      l[layout.offset(main_reg(slot) + 1)] = 1;
  };
  Label b0(layout.total_symbols(), 0);
  Label b1 = b0;
  for (std::size_t i = 0; i < ell; ++i) {
    set_unit(b0, i, i + 1);
    set_unit(b0, ell + i, i + 1);
    set_unit(b1, i, ell + i + 1);
    set_unit(b1, ell + i, ell + i + 1);
  }

  const Amplitude h{1.0 / std::sqrt(2.0), 0.0};
  StateVector psi = StateVector::from_amplitudes(layout, {{b0, h}, {b1, h}});
  const std::uint64_t before = o->queries();
  for (std::size_t i = 0; i < ell; ++i) o->apply_phase(psi, main_reg(i), main_reg(ell + i));

  std::vector<StateVector> basis;
  basis.push_back(StateVector::from_amplitudes(layout, {{b0, h}, {b1, h}}));
  basis.push_back(StateVector::from_amplitudes(layout, {{b0, h}, {b1, -h}}));
  MeasurementOutcome mo = psi.measure_in_basis(basis, rng);
  if (mo.index > 1 || mo.probability < 1.0 - kReadoutTol)
    throw std::runtime_error("trace: measurement was not deterministic");
  return {FieldElem{static_cast<Symbol>(mo.index)}, mo.probability, o->queries() - before};
}

// ---------------------------------------------------------------------------
// One-query row and column sums (parities when q = 2).
// ---------------------------------------------------------------------------

struct SumsResult {
  VectorFq sums;
  std::uint64_t queries_used;
};

inline SumsResult row_sums(const OraclePtr& o) {
  const std::uint64_t before = o->queries();
  VectorFq y = o->query(ones_vector(o->field(), o->cols()));
  return {std::move(y), o->queries() - before};
}

inline SumsResult column_sums(const OraclePtr& o) {
  const std::uint64_t before = o->queries();
  OraclePtr t = transposed_oracle(o);  // shares the counter
  VectorFq y = t->query(ones_vector(o->field(), t->cols()));
  return {std::move(y), o->queries() - before};
}

// ---------------------------------------------------------------------------
// Duplicate-row detection from random-probe signatures. A pair of equal rows
// always collides; a distinct pair survives all T probes with probability
// q^-T, so false positives are one-sided and exponentially unlikely.
// ---------------------------------------------------------------------------

inline std::size_t default_collision_trials(std::size_t m) {
  return 2 * std::max<std::size_t>(1, ceil_log2(std::max<std::size_t>(m, 2)));
}

struct CollisionResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // indices with equal signatures
  std::size_t trials;
  std::uint64_t queries_used;
};

inline CollisionResult identical_rows(const OraclePtr& o, Rng& rng, std::size_t trials = 0) {
  const std::size_t m = o->rows();
  if (trials == 0) trials = default_collision_trials(m);
  const std::uint64_t before = o->queries();
  std::vector<std::vector<Symbol>> sig(m);
  for (std::size_t t = 0; t < trials; ++t) {
    VectorFq y = o->query(random_vector(o->field(), o->cols(), rng));
    for (std::size_t i = 0; i < m; ++i) sig[i].push_back(y[i].v);
  }
  std::map<std::vector<Symbol>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < m; ++i) groups[sig[i]].push_back(i);
  CollisionResult res{{}, trials, 0};
  for (const auto& [s, idx] : groups)
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b) res.pairs.emplace_back(idx[a], idx[b]);
  std::sort(res.pairs.begin(), res.pairs.end());
  res.queries_used = o->queries() - before;
  return res;
}

inline CollisionResult identical_columns(const OraclePtr& o, Rng& rng, std::size_t trials = 0) {
  OraclePtr t = transposed_oracle(o);
  return identical_rows(t, rng, trials);
}

// ---------------------------------------------------------------------------
// Majority entry of each row or column of a 0/1 matrix, one query over the
// reals. Integer arithmetic is exact, so the all-ones probe returns the row
// sums themselves.
// ---------------------------------------------------------------------------

class RealBinaryOracle {
 public:
  explicit RealBinaryOracle(std::vector<std::vector<int>> m) : m_(std::move(m)) {
    rows_ = m_.size();
    cols_ = rows_ ? m_[0].size() : 0;
    for (const auto& row : m_) {
      if (row.size() != cols_) throw std::invalid_argument("real oracle: ragged matrix");
      for (int v : row)
        if (v != 0 && v != 1) throw std::invalid_argument("real oracle: entries must be 0/1");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint64_t queries() const { return count_.load(); }

  std::vector<long long> mv_query(const std::vector<long long>& x) {
    if (x.size() != cols_) throw std::invalid_argument("real oracle: bad query length");
    ++count_;
    std::vector<long long> y(rows_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) y[i] += m_[i][j] * x[j];
    return y;
  }

  std::vector<long long> vm_query(const std::vector<long long>& y) {
    if (y.size() != rows_) throw std::invalid_argument("real oracle: bad query length");
    ++count_;
    std::vector<long long> x(cols_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) x[j] += m_[i][j] * y[i];
    return x;
  }

 private:
  std::vector<std::vector<int>> m_;
  std::size_t rows_, cols_;
  std::atomic<std::uint64_t> count_{0};
};

struct MajorityResult {
  std::vector<int> bits;    // 1 where ones hold a strict majority
  std::vector<bool> tied;   // exact half-half split (bit reported as 0)
  std::uint64_t queries_used;
};

inline MajorityResult majority_rows(RealBinaryOracle& o) {
  const std::uint64_t before = o.queries();
  std::vector<long long> s = o.mv_query(std::vector<long long>(o.cols(), 1));
  MajorityResult res;
  for (long long v : s) {
    res.bits.push_back(2 * v > static_cast<long long>(o.cols()) ? 1 : 0);
    res.tied.push_back(2 * v == static_cast<long long>(o.cols()));
  }
  res.queries_used = o.queries() - before;
  return res;
}

inline MajorityResult majority_columns(RealBinaryOracle& o) {
  const std::uint64_t before = o.queries();
  std::vector<long long> s = o.vm_query(std::vector<long long>(o.rows(), 1));
  MajorityResult res;
  for (long long v : s) {
    res.bits.push_back(2 * v > static_cast<long long>(o.rows()) ? 1 : 0);
    res.tied.push_back(2 * v == static_cast<long long>(o.rows()));
  }
  res.queries_used = o.queries() - before;
  return res;
}

// ---------------------------------------------------------------------------
// Row/column sums through scalar access only: m (resp. n) classical queries,
// pinning e_i against the all-ones probe.
// ---------------------------------------------------------------------------

inline SumsResult vmv_row_sums(const OraclePtr& o) {
  if (o->kind() != OracleKind::vmv) throw std::invalid_argument("vmv sums: wrong oracle kind");
  const std::uint64_t before = o->queries();
  VectorFq x = ones_vector(o->field(), o->cols());
  VectorFq out(o->field(), o->rows());
  for (std::size_t i = 0; i < o->rows(); ++i)
    out[i] = o->query_vmv(x, unit_vector(o->field(), o->rows(), i));
  return {std::move(out), o->queries() - before};
}

inline SumsResult vmv_column_sums(const OraclePtr& o) {
  if (o->kind() != OracleKind::vmv) throw std::invalid_argument("vmv sums: wrong oracle kind");
  const std::uint64_t before = o->queries();
  VectorFq y = ones_vector(o->field(), o->rows());
  VectorFq out(o->field(), o->cols());
  for (std::size_t j = 0; j < o->cols(); ++j)
    out[j] = o->query_vmv(unit_vector(o->field(), o->cols(), j), y);
  return {std::move(out), o->queries() - before};
}

// ---------------------------------------------------------------------------
// Random border padding: wraps an m x n oracle as the (m+1) x (n+1) oracle of
//
//     A = [ a  u^T ]
//         [ v   M  ]
//
// at one base query per application (the border terms cost nothing): for
// x' = (x0, x), the image is (a x0 + u.x, x0 v + M x). When rank M >= n - 1,
// a uniformly random border makes A full-rank with probability at least
// (1 - 1/q)^2, which lets algorithms that assume invertibility run on
// nearly-full-rank instances after a few retries.
// ---------------------------------------------------------------------------

class PaddedMvOracle final : public Oracle {
 public:
  PaddedMvOracle(OraclePtr base, VectorFq u, VectorFq v, FieldElem a)
      : Oracle(base->kind(), QueryFlavor::standard, base->field(), base->rows() + 1,
               base->cols() + 1, counter_of(*base)),
        base_(std::move(base)),
        u_(std::move(u)),
        v_(std::move(v)),
        a_(a) {
    if (base_->kind() == OracleKind::vmv)
      throw std::invalid_argument("padding: base must be a matrix-vector oracle");
    require_same_field(field(), u_.field);
    require_same_field(field(), v_.field);
    if (u_.size() != base_->cols() || v_.size() != base_->rows())
      throw std::invalid_argument("padding: border vectors have wrong shape");
  }

  void apply_standard(StateVector& s, std::size_t in_reg, std::size_t out_reg,
                      bool inverse = false) override {
    validate_pair(s, in_reg, out_reg);
    const Field& f = *field();
    const std::size_t n = cols() - 1, m = rows() - 1;
    const std::size_t xo = s.layout().offset(in_reg), yo = s.layout().offset(out_reg);

    // Free border contributions; they read only the input register, so they
    // commute with the base query and invert by subtraction.
    s.apply_permutation([&](Label& l) {
      auto accum = [&](std::size_t pos, FieldElem d) {
        FieldElem cur{l[pos]};
        l[pos] = (inverse ? f.sub(cur, d) : f.add(cur, d)).v;
      };
      FieldElem x0{l[xo]};
      if (x0.v != 0)
        for (std::size_t i = 0; i < m; ++i) accum(yo + 1 + i, f.mul(v_[i], x0));
      FieldElem border = f.mul(a_, x0);
      for (std::size_t j = 0; j < n; ++j)
        border = f.add(border, f.mul(u_[j], FieldElem{l[xo + 1 + j]}));
      accum(yo, border);
    });

    // Charged part: one base query on the main blocks, exposed by register
    // splits that are undone afterwards.
    const std::size_t lo = std::min(in_reg, out_reg), hi = std::max(in_reg, out_reg);
    s.split_register(hi, {1, hi == in_reg ? n : m});
    s.split_register(lo, {1, lo == in_reg ? n : m});
    const std::size_t in_main = (in_reg == lo) ? lo + 1 : hi + 2;
    const std::size_t out_main = (out_reg == lo) ? lo + 1 : hi + 2;
    base_->apply_standard(s, in_main, out_main, inverse);
    s.merge_registers(hi + 1, 2);
    s.merge_registers(lo, 2);
  }

  VectorFq border_u() const { return u_; }
  VectorFq border_v() const { return v_; }
  FieldElem border_a() const { return a_; }

 private:
  OraclePtr base_;
  VectorFq u_, v_;
  FieldElem a_;
};

// The padded matrix built explicitly from a hidden matrix and a recorded
// border; test harnesses replay audits through this to cross-check the
// oracle adapter, which never forms A itself.
inline MatrixFq bordered_matrix(const MatrixFq& m, const VectorFq& u, const VectorFq& v,
                                FieldElem a) {
  if (u.size() != m.cols() || v.size() != m.rows())
    throw std::invalid_argument("padding: border vectors have wrong shape");
  MatrixFq out(m.field(), m.rows() + 1, m.cols() + 1);
  out.at(0, 0) = a;
  for (std::size_t j = 0; j < m.cols(); ++j) out.at(0, j + 1) = u[j];
  for (std::size_t i = 0; i < m.rows(); ++i) out.at(i + 1, 0) = v[i];
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.at(i + 1, j + 1) = m.at(i, j);
  return out;
}

inline OraclePtr padded_mv_oracle(OraclePtr base, VectorFq u, VectorFq v, FieldElem a) {
  return std::make_shared<PaddedMvOracle>(std::move(base), std::move(u), std::move(v), a);
}

// Same border construction for scalar access: y'^T M' x' splits into the base
// bilinear form plus border terms that depend only on the query vectors.
class PaddedVmvOracle final : public Oracle {
 public:
  PaddedVmvOracle(OraclePtr base, VectorFq u, VectorFq v, FieldElem a)
      : Oracle(OracleKind::vmv, QueryFlavor::standard, base->field(), base->rows() + 1,
               base->cols() + 1, counter_of(*base)),
        base_(std::move(base)),
        u_(std::move(u)),
        v_(std::move(v)),
        a_(a) {
    if (base_->kind() != OracleKind::vmv)
      throw std::invalid_argument("padding: base must be a vmv oracle");
    require_same_field(field(), u_.field);
    require_same_field(field(), v_.field);
    if (u_.size() != base_->cols() || v_.size() != base_->rows())
      throw std::invalid_argument("padding: border vectors have wrong shape");
  }

  void apply_vmv_standard(StateVector& s, std::size_t x_reg, std::size_t y_reg,
                          std::size_t a_reg, bool inverse = false) override {
    validate_vmv(s, x_reg, y_reg, a_reg);
    const Field& f = *field();
    const std::size_t n = cols() - 1, m = rows() - 1;
    const std::size_t xo = s.layout().offset(x_reg), yo = s.layout().offset(y_reg);
    const std::size_t ao = s.layout().offset(a_reg);

    s.apply_permutation([&](Label& l) {
      FieldElem x0{l[xo]}, y0{l[yo]};
      FieldElem d = f.mul(f.mul(y0, a_), x0);
      for (std::size_t i = 0; i < m; ++i)
        d = f.add(d, f.mul(f.mul(FieldElem{l[yo + 1 + i]}, v_[i]), x0));
      for (std::size_t j = 0; j < n; ++j)
        d = f.add(d, f.mul(f.mul(y0, u_[j]), FieldElem{l[xo + 1 + j]}));
      FieldElem cur{l[ao]};
      l[ao] = (inverse ? f.sub(cur, d) : f.add(cur, d)).v;
    });

    std::array<std::size_t, 2> ordered{std::min(x_reg, y_reg), std::max(x_reg, y_reg)};
    const std::size_t lo = ordered[0], hi = ordered[1];
    s.split_register(hi, {1, hi == x_reg ? n : m});
    s.split_register(lo, {1, lo == x_reg ? n : m});
    const std::size_t x_main = (x_reg == lo) ? lo + 1 : hi + 2;
    const std::size_t y_main = (y_reg == lo) ? lo + 1 : hi + 2;
    const std::size_t a_adj = a_reg + (a_reg > lo ? 1 : 0) + (a_reg > hi ? 1 : 0);
    base_->apply_vmv_standard(s, x_main, y_main, a_adj, inverse);
    s.merge_registers(hi + 1, 2);
    s.merge_registers(lo, 2);
  }

 private:
  OraclePtr base_;
  VectorFq u_, v_;
  FieldElem a_;
};

inline OraclePtr padded_vmv_oracle(OraclePtr base, VectorFq u, VectorFq v, FieldElem a) {
  return std::make_shared<PaddedVmvOracle>(std::move(base), std::move(u), std::move(v), a);
}

// ---------------------------------------------------------------------------
// Reference solver: learns the hidden matrix column by column (one query per
// unit probe), then solves A z = b exactly. Succeeds iff A is invertible.
// ---------------------------------------------------------------------------

struct SolverResult {
  std::optional<VectorFq> solution;
  MatrixFq learned;
  std::uint64_t queries_used;
};

inline SolverResult reference_linear_solver(const OraclePtr& o, const VectorFq& b) {
  if (o->rows() != o->cols()) throw std::invalid_argument("solver: matrix must be square");
  require_same_field(o->field(), b.field);
  if (b.size() != o->rows()) throw std::invalid_argument("solver: rhs has wrong length");
  const std::size_t n = o->cols();
  const std::uint64_t before = o->queries();
  MatrixFq a(o->field(), n, n);
  for (std::size_t j = 0; j < n; ++j) {
    VectorFq col = o->query(unit_vector(o->field(), n, j));
    for (std::size_t i = 0; i < n; ++i) a.at(i, j) = col[i];
  }
  SolverResult res{std::nullopt, a, o->queries() - before};
  if (rank(a) < n) return res;
  auto sol = solve(a, b);
  res.solution = sol->particular;  // full rank: consistent with empty null space
  return res;
}

// ---------------------------------------------------------------------------
// Full-rank decision through a linear solver: pad the hidden n x n matrix M
// with a random border, solve A x = e_1, and read off the verdict from the
// first coordinate. By the cofactor identity (A^{-1})_{11} = det(M) / det(A),
// so when A is invertible, x_1 != 0 exactly when M is full-rank. Retries
// fresh borders while the solver reports a singular system; the audit trail
// records every border tried so a test harness can replay the run against
// the hidden matrix.
// ---------------------------------------------------------------------------

using LinearSolver =
    std::function<std::optional<VectorFq>(const OraclePtr&, const VectorFq&)>;

inline std::optional<VectorFq> reference_solve(const OraclePtr& o, const VectorFq& b) {
  return reference_linear_solver(o, b).solution;
}

struct PaddingAudit {
  VectorFq u, v;
  FieldElem a;
  bool invertible;
};

struct RankReductionResult {
  std::optional<bool> full_rank;     // verdict from the first invertible padding
  std::optional<VectorFq> solution;  // the x with A x = e_1 behind that verdict
  std::size_t attempts;
  std::vector<PaddingAudit> audits;
  std::uint64_t queries_used;
};

inline RankReductionResult fullrank_via_solver(const OraclePtr& o, const LinearSolver& solver,
                                               Rng& rng, std::size_t max_attempts = 8) {
  if (o->rows() != o->cols()) throw std::invalid_argument("padding: matrix must be square");
  if (o->kind() == OracleKind::vmv)
    throw std::invalid_argument("padding: needs matrix-vector access");
  const FieldPtr& f = o->field();
  const std::size_t n = o->cols();
  const std::uint64_t before = o->queries();
  RankReductionResult res{std::nullopt, std::nullopt, 0, {}, 0};
  for (std::size_t att = 0; att < max_attempts; ++att) {
    ++res.attempts;
    VectorFq u = random_vector(f, n, rng);
    VectorFq v = random_vector(f, n, rng);
    FieldElem a = FieldElem{static_cast<Symbol>(rng.below(f->q()))};
    OraclePtr padded = padded_mv_oracle(o, u, v, a);
    std::optional<VectorFq> sol = solver(padded, unit_vector(f, n + 1, 0));
    res.audits.push_back({std::move(u), std::move(v), a, sol.has_value()});
    if (sol) {
      res.full_rank = ((*sol)[0].v != 0);
      res.solution = std::move(sol);
      break;
    }
  }
  res.queries_used = o->queries() - before;
  return res;
}

inline RankReductionResult fullrank_via_solver(const OraclePtr& o, Rng& rng,
                                               std::size_t max_attempts = 8) {
  return fullrank_via_solver(o, reference_solve, rng, max_attempts);
}

}  // namespace mvq
