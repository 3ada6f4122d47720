#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvq/linalg.hpp"
#include "mvq/state.hpp"

namespace mvq {

enum class OracleKind { mv, vm, vmv };
enum class QueryFlavor { standard, phase };

// Above this dense dimension the transpose adapter stops running its
// QFT/exchange circuit and applies the (operator-identical) label action
// directly; the circuit form is what the equivalence checks exercise.
inline constexpr std::uint64_t kCircuitSimCap = 1ull << 20;

// Black-box access to a hidden matrix. Algorithms see only the apply/query
// interface and the counter; the matrix itself never leaves this layer.
// Every public application, inverse application, or classical query costs
// exactly one query on the (possibly shared) counter.
class Oracle {
 public:
  virtual ~Oracle() = default;

  OracleKind kind() const { return kind_; }
  QueryFlavor flavor() const { return flavor_; }
  const FieldPtr& field() const { return field_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint64_t queries() const { return counter_->load(); }

  // |x, y> -> |x, y +/- Mx> on registers (in_reg: cols, out_reg: rows).
  virtual void apply_standard(StateVector&, std::size_t, std::size_t, bool = false) {
    throw std::logic_error("oracle: standard queries unsupported for this kind");
  }

  // Diagonal e(y^T M x) on the same register pair (conjugated on request).
  virtual void apply_phase(StateVector&, std::size_t, std::size_t, bool = false) {
    throw std::logic_error("oracle: phase queries unsupported for this kind");
  }

  // |x, y, a> -> |x, y, a +/- y^T M x>.
  virtual void apply_vmv_standard(StateVector&, std::size_t, std::size_t, std::size_t,
                                  bool = false) {
    throw std::logic_error("oracle: vmv queries unsupported for this kind");
  }

  // Diagonal e(a * y^T M x).
  virtual void apply_vmv_phase(StateVector&, std::size_t, std::size_t, std::size_t,
                               bool = false) {
    throw std::logic_error("oracle: vmv queries unsupported for this kind");
  }

  // Classical query: runs the standard circuit on a basis state and reads
  // the out register deterministically. One query.
  VectorFq query(const VectorFq& x) {
    require_same_field(field_, x.field);
    if (x.size() != cols_) throw std::invalid_argument("oracle: query has wrong length");
    RegisterLayout layout(field_, {cols_, rows_});
    Label l(cols_ + rows_, 0);
    for (std::size_t i = 0; i < cols_; ++i) l[i] = x[i].v;
    StateVector s = StateVector::basis(std::move(layout), std::move(l));
    apply_standard(s, 0, 1);
    Label out = s.readout_basis_label();
    VectorFq y(field_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) y[i] = FieldElem{out[cols_ + i]};
    return y;
  }

  // Classical scalar query for VMV oracles: returns y^T M x. One query.
  FieldElem query_vmv(const VectorFq& x, const VectorFq& y) {
    require_same_field(field_, x.field);
    require_same_field(field_, y.field);
    if (x.size() != cols_ || y.size() != rows_)
      throw std::invalid_argument("oracle: vmv query has wrong shape");
    RegisterLayout layout(field_, {cols_, rows_, 1});
    Label l(cols_ + rows_ + 1, 0);
    for (std::size_t i = 0; i < cols_; ++i) l[i] = x[i].v;
    for (std::size_t i = 0; i < rows_; ++i) l[cols_ + i] = y[i].v;
    StateVector s = StateVector::basis(std::move(layout), std::move(l));
    apply_vmv_standard(s, 0, 1, 2);
    Label out = s.readout_basis_label();
    return FieldElem{out[cols_ + rows_]};
  }

 protected:
  Oracle(OracleKind kind, QueryFlavor flavor, FieldPtr field, std::size_t rows,
         std::size_t cols, std::shared_ptr<std::atomic<std::uint64_t>> counter = nullptr)
      : kind_(kind),
        flavor_(flavor),
        field_(std::move(field)),
        rows_(rows),
        cols_(cols),
        counter_(counter ? std::move(counter)
                         : std::make_shared<std::atomic<std::uint64_t>>(0)) {}

  void bump() const { counter_->fetch_add(1); }

  void validate_pair(const StateVector& s, std::size_t in_reg, std::size_t out_reg) const {
    require_same_field(s.layout().field(), field_);
    if (in_reg == out_reg) throw std::invalid_argument("oracle: registers must be distinct");
    if (s.layout().size(in_reg) != cols_ || s.layout().size(out_reg) != rows_)
      throw std::invalid_argument("oracle: register sizes do not match oracle shape");
  }

  void validate_vmv(const StateVector& s, std::size_t x_reg, std::size_t y_reg,
                    std::size_t a_reg) const {
    require_same_field(s.layout().field(), field_);
    if (x_reg == y_reg || x_reg == a_reg || y_reg == a_reg)
      throw std::invalid_argument("oracle: registers must be distinct");
    if (s.layout().size(x_reg) != cols_ || s.layout().size(y_reg) != rows_ ||
        s.layout().size(a_reg) != 1)
      throw std::invalid_argument("oracle: register sizes do not match oracle shape");
  }

  // Adapters built inside this layer may read the hidden matrix; algorithm
  // code never sees it.
  virtual const MatrixFq* stored_matrix() const { return nullptr; }
  static const MatrixFq* peek_matrix(const Oracle& o) { return o.stored_matrix(); }
  static std::shared_ptr<std::atomic<std::uint64_t>> counter_of(const Oracle& o) {
    return o.counter_;
  }

 private:
  OracleKind kind_;
  QueryFlavor flavor_;
  FieldPtr field_;
  std::size_t rows_, cols_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

using OraclePtr = std::shared_ptr<Oracle>;

namespace detail {

inline std::vector<Symbol> matvec_symbols(const MatrixFq& m, const std::vector<Symbol>& x) {
  const Field& f = *m.field();
  std::vector<Symbol> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    FieldElem acc = f.zero();
    for (std::size_t j = 0; j < m.cols(); ++j)
      acc = f.add(acc, f.mul(m.at(i, j), FieldElem{x[j]}));
    out[i] = acc.v;
  }
  return out;
}

}  // namespace detail

// Matrix-vector oracle over a hidden matrix. The native flavor decides which
// primitive acts directly; the other is realized by Fourier conjugation of
// the output register, still one query.
class MatrixOracle final : public Oracle {
 public:
  MatrixOracle(MatrixFq m, QueryFlavor flavor, OracleKind kind = OracleKind::mv)
      : Oracle(kind, flavor, m.field(), m.rows(), m.cols()), m_(std::move(m)) {
    if (kind == OracleKind::vmv) throw std::invalid_argument("oracle: wrong kind for MatrixOracle");
  }

  void apply_standard(StateVector& s, std::size_t in_reg, std::size_t out_reg,
                      bool inverse = false) override {
    validate_pair(s, in_reg, out_reg);
    if (flavor() == QueryFlavor::standard) {
      raw_standard(s, in_reg, out_reg, inverse);
    } else {
      // U = (1 x F^dag) U_phase (1 x F); inverse conjugates the phase.
      s.apply_qft(out_reg, false);
      raw_phase(s, in_reg, out_reg, inverse);
      s.apply_qft(out_reg, true);
    }
    bump();
  }

  void apply_phase(StateVector& s, std::size_t in_reg, std::size_t out_reg,
                   bool conjugate = false) override {
    validate_pair(s, in_reg, out_reg);
    if (flavor() == QueryFlavor::phase) {
      raw_phase(s, in_reg, out_reg, conjugate);
    } else if (!conjugate) {
      // U_phase = (1 x F) U (1 x F^dag).
      s.apply_qft(out_reg, true);
      raw_standard(s, in_reg, out_reg, false);
      s.apply_qft(out_reg, false);
    } else {
      s.apply_qft(out_reg, false);
      raw_standard(s, in_reg, out_reg, false);
      s.apply_qft(out_reg, true);
    }
    bump();
  }

 private:
  void raw_standard(StateVector& s, std::size_t in_reg, std::size_t out_reg, bool inverse) {
    s.apply_standard_query(
        [this](const std::vector<Symbol>& x) { return detail::matvec_symbols(m_, x); },
        in_reg, out_reg, inverse);
  }

  void raw_phase(StateVector& s, std::size_t in_reg, std::size_t out_reg, bool conjugate) {
    s.apply_phase_query(
        [this](const std::vector<Symbol>& x) { return detail::matvec_symbols(m_, x); },
        in_reg, out_reg, conjugate);
  }

  const MatrixFq* stored_matrix() const override { return &m_; }

  MatrixFq m_;
};

// Vector-matrix-vector oracle: classical value y^T M x into a scalar register.
class VmvOracle final : public Oracle {
 public:
  VmvOracle(MatrixFq m, QueryFlavor flavor)
      : Oracle(OracleKind::vmv, flavor, m.field(), m.rows(), m.cols()), m_(std::move(m)) {}

  void apply_vmv_standard(StateVector& s, std::size_t x_reg, std::size_t y_reg,
                          std::size_t a_reg, bool inverse = false) override {
    validate_vmv(s, x_reg, y_reg, a_reg);
    if (flavor() == QueryFlavor::standard) {
      raw_standard(s, x_reg, y_reg, a_reg, inverse);
    } else {
      s.apply_qft(a_reg, false);
      raw_phase(s, x_reg, y_reg, a_reg, inverse);
      s.apply_qft(a_reg, true);
    }
    bump();
  }

  void apply_vmv_phase(StateVector& s, std::size_t x_reg, std::size_t y_reg,
                       std::size_t a_reg, bool conjugate = false) override {
    validate_vmv(s, x_reg, y_reg, a_reg);
    if (flavor() == QueryFlavor::phase) {
      raw_phase(s, x_reg, y_reg, a_reg, conjugate);
    } else if (!conjugate) {
      s.apply_qft(a_reg, true);
      raw_standard(s, x_reg, y_reg, a_reg, false);
      s.apply_qft(a_reg, false);
    } else {
      s.apply_qft(a_reg, false);
      raw_standard(s, x_reg, y_reg, a_reg, false);
      s.apply_qft(a_reg, true);
    }
    bump();
  }

 private:
  FieldElem bilinear(const Label& l, std::size_t x_off, std::size_t y_off) const {
    const Field& f = *field();
    FieldElem acc = f.zero();
    for (std::size_t i = 0; i < rows(); ++i) {
      FieldElem yi{l[y_off + i]};
      if (yi.v == 0) continue;
      FieldElem row = f.zero();
      for (std::size_t j = 0; j < cols(); ++j)
        row = f.add(row, f.mul(m_.at(i, j), FieldElem{l[x_off + j]}));
      acc = f.add(acc, f.mul(yi, row));
    }
    return acc;
  }

  void raw_standard(StateVector& s, std::size_t x_reg, std::size_t y_reg, std::size_t a_reg,
                    bool inverse) {
    const Field& f = *field();
    const std::size_t x_off = s.layout().offset(x_reg);
    const std::size_t y_off = s.layout().offset(y_reg);
    const std::size_t a_off = s.layout().offset(a_reg);
    s.apply_permutation([&, this](Label& l) {
      FieldElem v = bilinear(l, x_off, y_off);
      FieldElem cur{l[a_off]};
      l[a_off] = (inverse ? f.sub(cur, v) : f.add(cur, v)).v;
    });
  }

  void raw_phase(StateVector& s, std::size_t x_reg, std::size_t y_reg, std::size_t a_reg,
                 bool conjugate) {
    const Field& f = *field();
    const std::size_t x_off = s.layout().offset(x_reg);
    const std::size_t y_off = s.layout().offset(y_reg);
    const std::size_t a_off = s.layout().offset(a_reg);
    s.apply_diagonal([&, this](const Label& l) {
      FieldElem v = f.mul(FieldElem{l[a_off]}, bilinear(l, x_off, y_off));
      Amplitude ph = f.char_e(v);
      return conjugate ? std::conj(ph) : ph;
    });
  }

  const MatrixFq* stored_matrix() const override { return &m_; }

  MatrixFq m_;
};

inline OraclePtr make_mv_oracle(MatrixFq m, QueryFlavor flavor = QueryFlavor::standard) {
  return std::make_shared<MatrixOracle>(std::move(m), flavor, OracleKind::mv);
}

// Left-multiplication access to M, i.e. an MV oracle over M^T.
inline OraclePtr make_vm_oracle(const MatrixFq& m, QueryFlavor flavor = QueryFlavor::standard) {
  return std::make_shared<MatrixOracle>(m.transpose(), flavor, OracleKind::vm);
}

inline OraclePtr make_vmv_oracle(MatrixFq m, QueryFlavor flavor = QueryFlavor::standard) {
  return std::make_shared<VmvOracle>(std::move(m), flavor);
}

// Simulates the transposed oracle with one query per application: Fourier
// transforms on the output register around an exchanged-register phase query
// of the base oracle. Shares the base counter. Past kCircuitSimCap the
// operator-identical direct label action replaces the circuit form.
class TransposedOracle final : public Oracle {
 public:
  explicit TransposedOracle(OraclePtr base)
      : Oracle(base->kind() == OracleKind::mv ? OracleKind::vm : OracleKind::mv,
               QueryFlavor::standard, base->field(), base->cols(), base->rows(),
               counter_of(*base)),
        base_(std::move(base)) {
    if (base_->kind() == OracleKind::vmv)
      throw std::invalid_argument("oracle: cannot transpose a vmv oracle");
  }

  void apply_standard(StateVector& s, std::size_t in_reg, std::size_t out_reg,
                      bool inverse = false) override {
    validate_pair(s, in_reg, out_reg);
    auto dim = s.layout().dense_dim();
    if (dim && *dim <= kCircuitSimCap) {
      // U^MV(M^T) = (1 x F^dag) . swap . U^MVphase(M) . swap . (1 x F).
      s.apply_qft(out_reg, false);
      s.exchange_registers(in_reg, out_reg);
      base_->apply_phase(s, in_reg, out_reg, inverse);
      s.exchange_registers(in_reg, out_reg);
      s.apply_qft(out_reg, true);
      return;  // the base phase query already paid the query
    }
    const MatrixFq* m = peek_matrix(*base_);
    if (!m) throw std::logic_error("oracle: transpose adapter lacks matrix access");
    const Field& f = *field();
    const std::size_t in_off = s.layout().offset(in_reg);
    const std::size_t out_off = s.layout().offset(out_reg);
    s.apply_permutation([&](Label& l) {
      // y += M^T x, accumulated column-wise to keep M in row-major order.
      for (std::size_t i = 0; i < m->rows(); ++i) {
        FieldElem xi{l[in_off + i]};
        if (xi.v == 0) continue;
        for (std::size_t j = 0; j < m->cols(); ++j) {
          FieldElem cur{l[out_off + j]};
          FieldElem d = f.mul(m->at(i, j), xi);
          l[out_off + j] = (inverse ? f.sub(cur, d) : f.add(cur, d)).v;
        }
      }
    });
    bump();
  }

  void apply_phase(StateVector& s, std::size_t in_reg, std::size_t out_reg,
                   bool conjugate = false) override {
    validate_pair(s, in_reg, out_reg);
    // e(y^T M^T x) = e(x^T M y): the base phase query with roles exchanged.
    base_->apply_phase(s, out_reg, in_reg, conjugate);
  }

 private:
  OraclePtr base_;
};

inline OraclePtr transposed_oracle(OraclePtr base) {
  return std::make_shared<TransposedOracle>(std::move(base));
}

// Canonical circuits for a given oracle on two- or three-register layouts.
inline Circuit mv_standard_circuit(OraclePtr o, bool inverse = false) {
  return [o, inverse](StateVector& s) { o->apply_standard(s, 0, 1, inverse); };
}

inline Circuit mv_phase_circuit(OraclePtr o, bool conjugate = false) {
  return [o, conjugate](StateVector& s) { o->apply_phase(s, 0, 1, conjugate); };
}

inline Circuit vmv_standard_circuit(OraclePtr o, bool inverse = false) {
  return [o, inverse](StateVector& s) { o->apply_vmv_standard(s, 0, 1, 2, inverse); };
}

inline Circuit vmv_phase_circuit(OraclePtr o, bool conjugate = false) {
  return [o, conjugate](StateVector& s) { o->apply_vmv_phase(s, 0, 1, 2, conjugate); };
}

// One application of the simulated transpose on the canonical [base rows,
// base cols] layout; exactly one query to the base oracle.
inline Circuit transpose_simulation_circuit(OraclePtr base) {
  auto t = transposed_oracle(std::move(base));
  return mv_standard_circuit(std::move(t));
}

// Simulates a VMV standard query from two MV queries: compute |Mx> into a
// fresh ancilla, accumulate <y, Mx> into the scalar register, uncompute.
// Acts on the canonical [cols, rows, 1] layout; ancilla must return clean.
inline Circuit vmv_from_mv_simulation(OraclePtr base) {
  if (base->kind() == OracleKind::vmv)
    throw std::invalid_argument("oracle: vmv simulation needs a matrix-vector base");
  return [base](StateVector& s) {
    const Field& f = *base->field();
    const std::size_t m = base->rows();
    if (s.layout().num_registers() != 3)
      throw std::invalid_argument("oracle: vmv simulation expects three registers");
    s.append_register(m, std::vector<Symbol>(m, 0));
    base->apply_standard(s, 0, 3);
    const std::size_t y_off = s.layout().offset(1);
    const std::size_t a_off = s.layout().offset(2);
    const std::size_t anc_off = s.layout().offset(3);
    s.apply_permutation([&](Label& l) {
      FieldElem acc = f.zero();
      for (std::size_t i = 0; i < m; ++i)
        acc = f.add(acc, f.mul(FieldElem{l[y_off + i]}, FieldElem{l[anc_off + i]}));
      l[a_off] = f.add(FieldElem{l[a_off]}, acc).v;
    });
    base->apply_standard(s, 0, 3, /*inverse=*/true);
    s.remove_register(3, std::vector<Symbol>(m, 0), kAncillaTol);
  };
}

// Simulates an MV phase query from one VMV standard query: carry a scalar
// register in |1>, Fourier-conjugate the VMV query on it (which yields the
// phase e(a y^T M x)), and discard the untouched scalar.
inline Circuit mv_phase_from_vmv_simulation(OraclePtr base) {
  if (base->kind() != OracleKind::vmv)
    throw std::invalid_argument("oracle: phase simulation needs a vmv base");
  return [base](StateVector& s) {
    if (s.layout().num_registers() != 2)
      throw std::invalid_argument("oracle: phase simulation expects two registers");
    s.append_register(1, {1});
    s.apply_qft(2, true);
    base->apply_vmv_standard(s, 0, 1, 2);
    s.apply_qft(2, false);
    s.remove_register(2, {1}, kAncillaTol);
  };
}

}  // namespace mvq
