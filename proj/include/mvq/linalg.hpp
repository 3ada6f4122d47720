#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvq/field.hpp"
#include "mvq/rng.hpp"

namespace mvq {

struct VectorFq {
  FieldPtr field;
  std::vector<FieldElem> e;

  VectorFq() = default;
  VectorFq(FieldPtr f, std::size_t n) : field(std::move(f)), e(n) {}
  VectorFq(FieldPtr f, std::vector<FieldElem> v) : field(std::move(f)), e(std::move(v)) {}

  std::size_t size() const { return e.size(); }
  FieldElem& operator[](std::size_t i) { return e[i]; }
  FieldElem operator[](std::size_t i) const { return e[i]; }

  friend bool operator==(const VectorFq& a, const VectorFq& b) {
    return a.e == b.e && a.field->same_as(*b.field);
  }
};

class MatrixFq {
 public:
  MatrixFq() = default;
  MatrixFq(FieldPtr f, std::size_t rows, std::size_t cols)
      : field_(std::move(f)), rows_(rows), cols_(cols), e_(rows * cols) {}

  static MatrixFq identity(FieldPtr f, std::size_t n) {
    MatrixFq m(f, n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = f->one();
    return m;
  }

  const FieldPtr& field() const { return field_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  FieldElem& at(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
  FieldElem at(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }

  MatrixFq transpose() const {
    MatrixFq t(field_, cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t.at(j, i) = at(i, j);
    return t;
  }

  friend bool operator==(const MatrixFq& a, const MatrixFq& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.e_ == b.e_ &&
           a.field_->same_as(*b.field_);
  }

 private:
  FieldPtr field_;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<FieldElem> e_;
};

inline void require_same_field(const FieldPtr& a, const FieldPtr& b) {
  if (!a || !b || !a->same_as(*b))
    throw std::invalid_argument("linalg: operands from different fields");
}

inline MatrixFq add(const MatrixFq& a, const MatrixFq& b) {
  require_same_field(a.field(), b.field());
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("linalg: shape mismatch in add");
  MatrixFq out(a.field(), a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      out.at(i, j) = a.field()->add(a.at(i, j), b.at(i, j));
  return out;
}

inline MatrixFq scalar_mul(FieldElem s, const MatrixFq& a) {
  MatrixFq out(a.field(), a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      out.at(i, j) = a.field()->mul(s, a.at(i, j));
  return out;
}

inline MatrixFq mul(const MatrixFq& a, const MatrixFq& b) {
  require_same_field(a.field(), b.field());
  if (a.cols() != b.rows()) throw std::invalid_argument("linalg: shape mismatch in mul");
  const Field& f = *a.field();
  MatrixFq out(a.field(), a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      FieldElem aik = a.at(i, k);
      if (aik.v == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j)
        out.at(i, j) = f.add(out.at(i, j), f.mul(aik, b.at(k, j)));
    }
  return out;
}

inline VectorFq mul(const MatrixFq& a, const VectorFq& x) {
  require_same_field(a.field(), x.field);
  if (a.cols() != x.size()) throw std::invalid_argument("linalg: shape mismatch in mat-vec");
  const Field& f = *a.field();
  VectorFq out(a.field(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    FieldElem acc = f.zero();
    for (std::size_t j = 0; j < a.cols(); ++j)
      acc = f.add(acc, f.mul(a.at(i, j), x[j]));
    out[i] = acc;
  }
  return out;
}

inline FieldElem dot(const VectorFq& a, const VectorFq& b) {
  require_same_field(a.field, b.field);
  if (a.size() != b.size()) throw std::invalid_argument("linalg: shape mismatch in dot");
  const Field& f = *a.field;
  FieldElem acc = f.zero();
  for (std::size_t i = 0; i < a.size(); ++i) acc = f.add(acc, f.mul(a[i], b[i]));
  return acc;
}

// Gaussian elimination with first-nonzero pivoting. Row-reduces in place and
// reports pivot columns; determinant factor tracks row swaps and pivot
// scaling so square callers can recover det exactly.
struct EchelonForm {
  MatrixFq reduced;             // reduced row-echelon form
  std::vector<std::size_t> pivot_cols;
  std::size_t rank = 0;
  FieldElem det_scale;          // product of pivots times swap signs, pre-normalization
};

inline EchelonForm echelon_form(MatrixFq m) {
  const Field& f = *m.field();
  EchelonForm out;
  out.det_scale = f.one();
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
    std::size_t pivot = row;
    while (pivot < m.rows() && m.at(pivot, col).v == 0) ++pivot;
    if (pivot == m.rows()) continue;
    if (pivot != row) {
      for (std::size_t j = 0; j < m.cols(); ++j)
        std::swap(m.at(pivot, j), m.at(row, j));
      out.det_scale = f.neg(out.det_scale);
    }
    FieldElem p = m.at(row, col);
    out.det_scale = f.mul(out.det_scale, p);
    FieldElem pinv = f.inv(p);
    for (std::size_t j = col; j < m.cols(); ++j)
      m.at(row, j) = f.mul(pinv, m.at(row, j));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == row) continue;
      FieldElem c = m.at(i, col);
      if (c.v == 0) continue;
      for (std::size_t j = col; j < m.cols(); ++j)
        m.at(i, j) = f.sub(m.at(i, j), f.mul(c, m.at(row, j)));
    }
    out.pivot_cols.push_back(col);
    ++row;
  }
  out.rank = row;
  out.reduced = std::move(m);
  return out;
}

inline std::size_t rank(const MatrixFq& m) { return echelon_form(m).rank; }

inline std::size_t nullity(const MatrixFq& m) { return m.cols() - rank(m); }

inline FieldElem determinant(const MatrixFq& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("linalg: determinant of non-square");
  EchelonForm ef = echelon_form(m);
  return ef.rank == m.rows() ? ef.det_scale : m.field()->zero();
}

inline std::optional<MatrixFq> inverse(const MatrixFq& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("linalg: inverse of non-square");
  const std::size_t n = m.rows();
  MatrixFq aug(m.field(), n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug.at(i, j) = m.at(i, j);
    aug.at(i, n + i) = m.field()->one();
  }
  EchelonForm ef = echelon_form(std::move(aug));
  if (ef.rank < n || ef.pivot_cols[n - 1] != n - 1) return std::nullopt;
  MatrixFq out(m.field(), n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = ef.reduced.at(i, n + j);
  return out;
}

inline std::vector<VectorFq> null_space_basis(const MatrixFq& m) {
  const Field& f = *m.field();
  EchelonForm ef = echelon_form(m);
  std::vector<bool> is_pivot(m.cols(), false);
  for (auto c : ef.pivot_cols) is_pivot[c] = true;
  std::vector<VectorFq> basis;
  for (std::size_t free_col = 0; free_col < m.cols(); ++free_col) {
    if (is_pivot[free_col]) continue;
    VectorFq v(m.field(), m.cols());
    v[free_col] = f.one();
    for (std::size_t k = 0; k < ef.pivot_cols.size(); ++k)
      v[ef.pivot_cols[k]] = f.neg(ef.reduced.at(k, free_col));
    basis.push_back(std::move(v));
  }
  return basis;
}

struct LinearSystemSolution {
  VectorFq particular;
  std::vector<VectorFq> null_basis;
};

// Solves A x = b; nullopt when inconsistent.
inline std::optional<LinearSystemSolution> solve(const MatrixFq& a, const VectorFq& b) {
  require_same_field(a.field(), b.field);
  if (a.rows() != b.size()) throw std::invalid_argument("linalg: shape mismatch in solve");
  MatrixFq aug(a.field(), a.rows(), a.cols() + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) aug.at(i, j) = a.at(i, j);
    aug.at(i, a.cols()) = b[i];
  }
  EchelonForm ef = echelon_form(std::move(aug));
  if (!ef.pivot_cols.empty() && ef.pivot_cols.back() == a.cols()) return std::nullopt;
  LinearSystemSolution sol;
  sol.particular = VectorFq(a.field(), a.cols());
  for (std::size_t k = 0; k < ef.pivot_cols.size(); ++k)
    sol.particular[ef.pivot_cols[k]] = ef.reduced.at(k, a.cols());
  sol.null_basis = null_space_basis(a);
  return sol;
}

inline VectorFq unit_vector(const FieldPtr& f, std::size_t n, std::size_t i) {
  VectorFq v(f, n);
  v[i] = f->one();
  return v;
}

inline VectorFq ones_vector(const FieldPtr& f, std::size_t n) {
  VectorFq v(f, n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f->one();
  return v;
}

inline VectorFq random_vector(const FieldPtr& f, std::size_t n, Rng& rng) {
  VectorFq v(f, n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = FieldElem{static_cast<std::uint32_t>(rng.below(f->q()))};
  return v;
}

inline MatrixFq random_matrix(const FieldPtr& f, std::size_t rows, std::size_t cols, Rng& rng) {
  MatrixFq m(f, rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m.at(i, j) = FieldElem{static_cast<std::uint32_t>(rng.below(f->q()))};
  return m;
}

// Uniform sample from the rank-r stratum of F_q^{rows x cols}: draw full-rank
// U (rows x r) and V (r x cols) by rejection and return U*V. Every rank-r
// matrix has exactly |GL_r(F_q)| such factorizations, so the product is
// uniform on the stratum.
inline MatrixFq sample_matrix_of_rank(const FieldPtr& f, std::size_t rows,
                                      std::size_t cols, std::size_t r, Rng& rng) {
  if (r > rows || r > cols)
    throw std::invalid_argument("linalg: requested rank exceeds dimensions");
  if (r == 0) return MatrixFq(f, rows, cols);
  MatrixFq u(f, rows, r), v(f, r, cols);
  do {
    u = random_matrix(f, rows, r, rng);
  } while (rank(u) != r);
  do {
    v = random_matrix(f, r, cols, rng);
  } while (rank(v) != r);
  return mul(u, v);
}

// Bijection between [0, q^{rows*cols}) and matrices, row-major, first entry
// least significant. Useful for exhaustive sweeps.
inline MatrixFq matrix_from_index(const FieldPtr& f, std::size_t rows,
                                  std::size_t cols, std::uint64_t idx) {
  MatrixFq m(f, rows, cols);
  const std::uint64_t q = f->q();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      m.at(i, j) = FieldElem{static_cast<std::uint32_t>(idx % q)};
      idx /= q;
    }
  return m;
}

// Checked q^(rows*cols); nullopt on overflow past cap.
inline std::optional<std::uint64_t> matrix_space_size(std::uint64_t q, std::size_t rows,
                                                      std::size_t cols,
                                                      std::uint64_t cap = ~0ull) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    if (n > cap / q) return std::nullopt;
    n *= q;
    if (n > cap) return std::nullopt;
  }
  return n;
}

// ---- matrix file format ----
// Line 1: "q m n". For extension fields a line "modulus c0 c1 ... cr" must
// follow. Then m lines of n integers in [0, q), each the little-endian
// base-p encoding of an element. '#' starts a comment line.

inline std::string next_data_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return line;
  }
  throw std::invalid_argument("matrix file: unexpected end of input");
}

inline MatrixFq read_matrix(std::istream& in) {
  std::istringstream head(next_data_line(in));
  std::uint64_t q = 0;
  std::size_t m = 0, n = 0;
  if (!(head >> q >> m >> n)) throw std::invalid_argument("matrix file: bad header");
  if (m == 0 || n == 0) throw std::invalid_argument("matrix file: empty shape");
  auto [p, r] = prime_power_split(q);

  FieldPtr field;
  std::string row_line;
  if (r > 1) {
    std::string mod_line = next_data_line(in);
    std::istringstream ms(mod_line);
    std::string tag;
    ms >> tag;
    if (tag != "modulus")
      throw std::invalid_argument("matrix file: extension field requires a modulus line");
    std::vector<std::uint32_t> coeffs;
    std::uint32_t c;
    while (ms >> c) coeffs.push_back(c);
    field = make_field(p, r, std::move(coeffs));
  } else {
    field = make_field(p, 1);
  }

  MatrixFq out(field, m, n);
  for (std::size_t i = 0; i < m; ++i) {
    std::istringstream rs(next_data_line(in));
    for (std::size_t j = 0; j < n; ++j) {
      std::uint64_t v;
      if (!(rs >> v)) throw std::invalid_argument("matrix file: short row");
      if (v >= q) throw std::invalid_argument("matrix file: entry out of range");
      out.at(i, j) = FieldElem{static_cast<std::uint32_t>(v)};
    }
  }
  return out;
}

inline void write_matrix(std::ostream& os, const MatrixFq& m) {
  const Field& f = *m.field();
  os << f.q() << ' ' << m.rows() << ' ' << m.cols() << '\n';
  if (f.r() > 1) {
    os << "modulus";
    for (auto c : f.modulus()) os << ' ' << c;
    os << '\n';
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      os << (j ? " " : "") << m.at(i, j).v;
    os << '\n';
  }
}

}  // namespace mvq
