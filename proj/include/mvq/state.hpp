#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvq/field.hpp"
#include "mvq/rng.hpp"

namespace mvq {

using Symbol = std::uint32_t;
using Label = std::vector<Symbol>;  // all registers' symbols, concatenated
using Amplitude = std::complex<double>;

// Shared tolerance policy.
inline constexpr double kNormTol = 1e-9;
inline constexpr double kOrthonormalityTol = 1e-9;
inline constexpr double kEquivalenceTol = 1e-10;
inline constexpr double kAncillaTol = 1e-12;
inline constexpr double kSparseDenseTol = 1e-12;
inline constexpr double kUnitModulusTol = 1e-12;
inline constexpr double kReadoutTol = 1e-9;
// Amplitudes below this are numeric dust from exact cancellations and are
// dropped after expansion ops; far below every assertion tolerance above.
inline constexpr double kAmplitudePruneEps = 1e-14;
inline constexpr std::uint64_t kDefaultDenseCap = 1ull << 24;
inline constexpr std::uint64_t kSparseSupportCap = 1ull << 22;

// Registers hold fixed numbers of F_q symbols; a basis label is the
// concatenation of all registers' symbols. Labels order lexicographically
// with the first symbol most significant, which also fixes the dense index.
class RegisterLayout {
 public:
  RegisterLayout() = default;
  RegisterLayout(FieldPtr field, std::vector<std::size_t> sizes,
                 std::uint64_t dense_cap = kDefaultDenseCap)
      : field_(std::move(field)), sizes_(std::move(sizes)), dense_cap_(dense_cap) {
    if (!field_) throw std::invalid_argument("layout: null field");
    offsets_.reserve(sizes_.size());
    total_ = 0;
    for (auto s : sizes_) {
      if (s == 0) throw std::invalid_argument("layout: empty register");
      offsets_.push_back(total_);
      total_ += s;
    }
    if (total_ == 0) throw std::invalid_argument("layout: no registers");
  }

  const FieldPtr& field() const { return field_; }
  std::size_t num_registers() const { return sizes_.size(); }
  std::size_t size(std::size_t reg) const {
    check_reg(reg);
    return sizes_[reg];
  }
  std::size_t offset(std::size_t reg) const {
    check_reg(reg);
    return offsets_[reg];
  }
  std::size_t total_symbols() const { return total_; }
  std::uint64_t dense_cap() const { return dense_cap_; }

  // q^total_symbols when it fits in 62 bits.
  std::optional<std::uint64_t> dense_dim() const {
    std::uint64_t dim = 1;
    const std::uint64_t q = field_->q();
    for (std::size_t i = 0; i < total_; ++i) {
      if (dim > (1ull << 62) / q) return std::nullopt;
      dim *= q;
    }
    return dim;
  }

  bool can_densify() const {
    auto d = dense_dim();
    return d && *d <= dense_cap_;
  }

  friend bool operator==(const RegisterLayout& a, const RegisterLayout& b) {
    return a.sizes_ == b.sizes_ && a.field_->same_as(*b.field_);
  }

  void check_reg(std::size_t reg) const {
    if (reg >= sizes_.size()) throw std::invalid_argument("layout: register index out of range");
  }

 private:
  FieldPtr field_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
  std::uint64_t dense_cap_ = kDefaultDenseCap;
};

class StateVector;

struct MeasurementOutcome {
  std::size_t index = 0;            // basis-vector index; basis.size() means "other"
  std::optional<Label> label;       // set for computational measurements
  double probability = 0.0;
  std::vector<double> probabilities;  // per basis vector, plus residual at the end
  std::shared_ptr<StateVector> post_state;
};

class StateVector {
 public:
  static StateVector basis(RegisterLayout layout, Label label) {
    StateVector s(std::move(layout));
    s.validate_label(label);
    s.map_[std::move(label)] = 1.0;
    return s;
  }

  // Explicit superposition; the caller supplies normalized amplitudes.
  static StateVector from_amplitudes(RegisterLayout layout,
                                     std::vector<std::pair<Label, Amplitude>> amps) {
    StateVector s(std::move(layout));
    for (auto& [l, a] : amps) {
      s.validate_label(l);
      s.map_[std::move(l)] += a;
    }
    if (std::abs(s.norm() - 1.0) > kNormTol)
      throw std::invalid_argument("state: amplitudes are not normalized");
    return s;
  }

  const RegisterLayout& layout() const { return layout_; }
  bool is_sparse() const { return sparse_; }

  std::size_t support_size() const {
    if (sparse_) return map_.size();
    std::size_t n = 0;
    for (const auto& a : dense_)
      if (a != Amplitude{}) ++n;
    return n;
  }

  double norm() const {
    double s = 0;
    for_each_amplitude([&](const Label&, Amplitude a) { s += std::norm(a); });
    return std::sqrt(s);
  }

  Amplitude amplitude(const Label& l) const {
    if (sparse_) {
      auto it = map_.find(l);
      return it == map_.end() ? Amplitude{} : it->second;
    }
    return dense_[label_to_index(l)];
  }

  template <class Fn>
  void for_each_amplitude(Fn&& fn) const {
    if (sparse_) {
      for (const auto& [l, a] : map_) fn(l, a);
    } else {
      for (std::uint64_t i = 0; i < dense_.size(); ++i)
        if (dense_[i] != Amplitude{}) fn(index_to_label(i), dense_[i]);
    }
  }

  // <a|b>, conjugate-linear in a.
  static Amplitude inner(const StateVector& a, const StateVector& b) {
    if (!(a.layout_ == b.layout_)) throw std::invalid_argument("state: layout mismatch");
    Amplitude s{};
    if (a.sparse_) {
      for (const auto& [l, amp] : a.map_) s += std::conj(amp) * b.amplitude(l);
    } else if (b.sparse_) {
      for (const auto& [l, amp] : b.map_) s += std::conj(a.amplitude(l)) * amp;
    } else {
      for (std::size_t i = 0; i < a.dense_.size(); ++i)
        s += std::conj(a.dense_[i]) * b.dense_[i];
    }
    return s;
  }

  // Euclidean distance between two states on the same layout.
  static double distance(const StateVector& a, const StateVector& b) {
    if (!(a.layout_ == b.layout_)) throw std::invalid_argument("state: layout mismatch");
    double s = 0;
    if (a.sparse_ && b.sparse_) {
      auto ia = a.map_.begin(), ib = b.map_.begin();
      while (ia != a.map_.end() || ib != b.map_.end()) {
        if (ib == b.map_.end() || (ia != a.map_.end() && ia->first < ib->first)) {
          s += std::norm(ia->second);
          ++ia;
        } else if (ia == a.map_.end() || ib->first < ia->first) {
          s += std::norm(ib->second);
          ++ib;
        } else {
          s += std::norm(ia->second - ib->second);
          ++ia;
          ++ib;
        }
      }
    } else {
      StateVector da = a, db = b;
      da.to_dense();
      db.to_dense();
      for (std::size_t i = 0; i < da.dense_.size(); ++i)
        s += std::norm(da.dense_[i] - db.dense_[i]);
    }
    return std::sqrt(s);
  }

  void to_dense() {
    if (!sparse_) return;
    if (!layout_.can_densify())
      throw std::runtime_error("state: dense dimension exceeds cap");
    dense_.assign(*layout_.dense_dim(), Amplitude{});
    for (const auto& [l, a] : map_) dense_[label_to_index(l)] = a;
    map_.clear();
    sparse_ = false;
  }

  void to_sparse() {
    if (sparse_) return;
    for (std::uint64_t i = 0; i < dense_.size(); ++i)
      if (dense_[i] != Amplitude{}) map_[index_to_label(i)] = dense_[i];
    dense_.clear();
    dense_.shrink_to_fit();
    sparse_ = true;
  }

  // Symbol-wise Fourier transform of one register:
  // |x> -> q^{-1/2} sum_y e(x*y) |y> on each symbol (conjugated if inverse).
  void apply_qft(std::size_t reg, bool inverse = false) {
    layout_.check_reg(reg);
    const std::size_t off = layout_.offset(reg), len = layout_.size(reg);
    for (std::size_t s = 0; s < len; ++s) qft_symbol(off + s, inverse);
  }

  // |x, y> -> |x, y + f(x)> (or minus, when inverse). f maps the in-register
  // symbols to an out-register-sized addend.
  void apply_standard_query(const std::function<std::vector<Symbol>(const std::vector<Symbol>&)>& f,
                            std::size_t in_reg, std::size_t out_reg, bool inverse = false) {
    check_distinct(in_reg, out_reg);
    const Field& fld = *layout_.field();
    const std::size_t in_off = layout_.offset(in_reg), in_len = layout_.size(in_reg);
    const std::size_t out_off = layout_.offset(out_reg), out_len = layout_.size(out_reg);
    apply_permutation([&](Label& l) {
      std::vector<Symbol> x(l.begin() + in_off, l.begin() + in_off + in_len);
      std::vector<Symbol> add = f(x);
      if (add.size() != out_len)
        throw std::invalid_argument("state: query image has wrong length");
      for (std::size_t i = 0; i < out_len; ++i) {
        FieldElem cur{l[out_off + i]}, d{add[i]};
        l[out_off + i] = (inverse ? fld.sub(cur, d) : fld.add(cur, d)).v;
      }
    });
  }

  // Diagonal phase e(<y, f(x)>) on register pair (in, out).
  void apply_phase_query(const std::function<std::vector<Symbol>(const std::vector<Symbol>&)>& f,
                         std::size_t in_reg, std::size_t out_reg, bool conjugate = false) {
    check_distinct(in_reg, out_reg);
    const Field& fld = *layout_.field();
    const std::size_t in_off = layout_.offset(in_reg), in_len = layout_.size(in_reg);
    const std::size_t out_off = layout_.offset(out_reg), out_len = layout_.size(out_reg);
    apply_diagonal([&](const Label& l) {
      std::vector<Symbol> x(l.begin() + in_off, l.begin() + in_off + in_len);
      std::vector<Symbol> img = f(x);
      if (img.size() != out_len)
        throw std::invalid_argument("state: query image has wrong length");
      FieldElem acc = fld.zero();
      for (std::size_t i = 0; i < out_len; ++i)
        acc = fld.add(acc, fld.mul(FieldElem{l[out_off + i]}, FieldElem{img[i]}));
      Amplitude ph = fld.char_e(acc);
      return conjugate ? std::conj(ph) : ph;
    });
  }

  // Applies a label bijection. The callback must permute labels; anything
  // else silently corrupts the state, so callers own that contract.
  void apply_permutation(const std::function<void(Label&)>& fn) {
    if (sparse_) {
      std::map<Label, Amplitude> next;
      for (auto& [l, a] : map_) {
        Label nl = l;
        fn(nl);
        next[std::move(nl)] += a;
      }
      map_ = std::move(next);
    } else {
      std::vector<Amplitude> next(dense_.size());
      for (std::uint64_t i = 0; i < dense_.size(); ++i) {
        if (dense_[i] == Amplitude{}) continue;
        Label l = index_to_label(i);
        fn(l);
        next[label_to_index(l)] += dense_[i];
      }
      dense_ = std::move(next);
    }
  }

  void apply_diagonal(const std::function<Amplitude(const Label&)>& phase) {
    if (sparse_) {
      for (auto& [l, a] : map_) a *= phase(l);
    } else {
      for (std::uint64_t i = 0; i < dense_.size(); ++i) {
        if (dense_[i] == Amplitude{}) continue;
        dense_[i] *= phase(index_to_label(i));
      }
    }
  }

  // Exchanges the contents of two equal-size registers.
  void swap_registers(std::size_t i, std::size_t j) {
    layout_.check_reg(i);
    layout_.check_reg(j);
    if (layout_.size(i) != layout_.size(j))
      throw std::invalid_argument("state: swap of unequal registers");
    if (i == j) return;
    const std::size_t oi = layout_.offset(i), oj = layout_.offset(j), len = layout_.size(i);
    apply_permutation([&](Label& l) {
      for (std::size_t k = 0; k < len; ++k) std::swap(l[oi + k], l[oj + k]);
    });
  }

  // Exchanges two registers of possibly different sizes; the layout changes
  // accordingly. This is pure relabeling, hence unitary.
  void exchange_registers(std::size_t i, std::size_t j) {
    layout_.check_reg(i);
    layout_.check_reg(j);
    if (i == j) return;
    if (i > j) std::swap(i, j);
    std::vector<std::size_t> sizes = layout_sizes();
    std::vector<std::size_t> order(sizes.size());
    for (std::size_t k = 0; k < sizes.size(); ++k) order[k] = k;
    std::swap(order[i], order[j]);
    reorder_registers(order);
  }

  // Splits register reg into consecutive parts (sum must match). Labels are
  // untouched; only the register boundaries move.
  void split_register(std::size_t reg, const std::vector<std::size_t>& parts) {
    layout_.check_reg(reg);
    std::size_t total = 0;
    for (auto p : parts) total += p;
    if (total != layout_.size(reg) || parts.empty())
      throw std::invalid_argument("state: bad register split");
    std::vector<std::size_t> sizes = layout_sizes();
    sizes.erase(sizes.begin() + reg);
    sizes.insert(sizes.begin() + reg, parts.begin(), parts.end());
    layout_ = RegisterLayout(layout_.field(), std::move(sizes), layout_.dense_cap());
  }

  // Merges registers [first, first+count) into one.
  void merge_registers(std::size_t first, std::size_t count) {
    if (count < 2 || first + count > layout_.num_registers())
      throw std::invalid_argument("state: bad register merge");
    std::vector<std::size_t> sizes = layout_sizes();
    std::size_t total = 0;
    for (std::size_t k = 0; k < count; ++k) total += sizes[first + k];
    sizes.erase(sizes.begin() + first, sizes.begin() + first + count);
    sizes.insert(sizes.begin() + first, total);
    layout_ = RegisterLayout(layout_.field(), std::move(sizes), layout_.dense_cap());
  }

  // Appends a fresh register in the given basis state (product extension).
  void append_register(std::size_t size, const std::vector<Symbol>& fill) {
    if (fill.size() != size) throw std::invalid_argument("state: fill has wrong length");
    for (auto s : fill)
      if (s >= layout_.field()->q()) throw std::invalid_argument("state: fill symbol out of range");
    std::vector<std::size_t> sizes = layout_sizes();
    sizes.push_back(size);
    RegisterLayout next(layout_.field(), std::move(sizes), layout_.dense_cap());
    if (sparse_) {
      std::map<Label, Amplitude> nm;
      for (auto& [l, a] : map_) {
        Label nl = l;
        nl.insert(nl.end(), fill.begin(), fill.end());
        nm[std::move(nl)] = a;
      }
      map_ = std::move(nm);
    } else {
      std::uint64_t factor = 1, fill_idx = 0;
      const std::uint64_t q = layout_.field()->q();
      for (auto s : fill) {
        factor *= q;
        fill_idx = fill_idx * q + s;
      }
      std::vector<Amplitude> nd(dense_.size() * factor);
      for (std::uint64_t i = 0; i < dense_.size(); ++i)
        if (dense_[i] != Amplitude{}) nd[i * factor + fill_idx] = dense_[i];
      dense_ = std::move(nd);
    }
    layout_ = std::move(next);
  }

  // Removes a register that has returned to the expected basis state.
  // Amplitude mass elsewhere must be below tol (L2).
  void remove_register(std::size_t reg, const std::vector<Symbol>& expected, double tol) {
    layout_.check_reg(reg);
    if (expected.size() != layout_.size(reg))
      throw std::invalid_argument("state: expected pattern has wrong length");
    if (layout_.num_registers() < 2)
      throw std::invalid_argument("state: cannot remove the only register");
    const std::size_t off = layout_.offset(reg), len = layout_.size(reg);
    if (!sparse_) to_sparse();
    double off_mass = 0;
    std::map<Label, Amplitude> nm;
    for (auto& [l, a] : map_) {
      bool match = std::equal(expected.begin(), expected.end(), l.begin() + off);
      if (!match) {
        off_mass += std::norm(a);
        continue;
      }
      Label nl;
      nl.reserve(l.size() - len);
      nl.insert(nl.end(), l.begin(), l.begin() + off);
      nl.insert(nl.end(), l.begin() + off + len, l.end());
      nm[std::move(nl)] = a;
    }
    if (std::sqrt(off_mass) > tol)
      throw std::runtime_error("state: register is not clean at removal");
    std::vector<std::size_t> sizes = layout_sizes();
    sizes.erase(sizes.begin() + reg);
    map_ = std::move(nm);
    layout_ = RegisterLayout(layout_.field(), std::move(sizes), layout_.dense_cap());
    maybe_promote();
  }

  void prune(double eps = kAmplitudePruneEps) {
    if (!sparse_) return;
    for (auto it = map_.begin(); it != map_.end();)
      it = std::abs(it->second) <= eps ? map_.erase(it) : std::next(it);
  }

  // Projective measurement in a supplied orthonormal set; any residual mass
  // is reported as the final "other" outcome.
  MeasurementOutcome measure_in_basis(std::span<const StateVector> basis, Rng& rng) const {
    if (basis.empty()) throw std::invalid_argument("state: empty measurement basis");
    for (const auto& b : basis)
      if (!(b.layout_ == layout_)) throw std::invalid_argument("state: basis layout mismatch");
    for (std::size_t i = 0; i < basis.size(); ++i)
      for (std::size_t j = i; j < basis.size(); ++j) {
        Amplitude g = inner(basis[i], basis[j]);
        double want = i == j ? 1.0 : 0.0;
        if (std::abs(g - want) > kOrthonormalityTol)
          throw std::invalid_argument("state: measurement basis is not orthonormal");
      }

    std::vector<Amplitude> coeff(basis.size());
    std::vector<double> probs(basis.size() + 1, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      coeff[i] = inner(basis[i], *this);
      probs[i] = std::norm(coeff[i]);
      total += probs[i];
    }
    probs.back() = std::max(0.0, norm() * norm() - total);

    double u = rng.uniform01() * (total + probs.back());
    std::size_t pick = basis.size();
    double cum = 0;
    for (std::size_t i = 0; i <= basis.size(); ++i) {
      cum += probs[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }

    MeasurementOutcome out;
    out.index = pick;
    out.probabilities = probs;
    out.probability = probs[pick];
    if (pick < basis.size()) {
      StateVector post = basis[pick];
      if (std::abs(coeff[pick]) > 0) {
        Amplitude ph = coeff[pick] / std::abs(coeff[pick]);
        post.scale(ph);
      }
      out.post_state = std::make_shared<StateVector>(std::move(post));
    } else {
      StateVector post = *this;
      for (std::size_t i = 0; i < basis.size(); ++i) post.add_scaled(-coeff[i], basis[i]);
      double n = post.norm();
      if (n < 1e-15) throw std::runtime_error("state: residual outcome has no support");
      post.scale(1.0 / n);
      out.post_state = std::make_shared<StateVector>(std::move(post));
    }
    return out;
  }

  // Samples a basis label with Born probabilities.
  MeasurementOutcome measure_computational(Rng& rng) const {
    double norm2 = norm() * norm();
    double u = rng.uniform01() * norm2;
    MeasurementOutcome out;
    double cum = 0;
    std::size_t pos = 0;
    bool done = false;
    Label picked;
    Amplitude picked_amp{};
    for_each_amplitude([&](const Label& l, Amplitude a) {
      if (done) return;
      cum += std::norm(a);
      picked = l;
      picked_amp = a;
      ++pos;
      if (u < cum) done = true;
    });
    if (pos == 0) throw std::runtime_error("state: measuring the zero state");
    out.index = pos - 1;
    out.label = picked;
    out.probability = std::norm(picked_amp);
    StateVector post = basis(layout_, picked);
    post.scale(picked_amp / std::abs(picked_amp));
    out.post_state = std::make_shared<StateVector>(std::move(post));
    return out;
  }

  // Deterministic readout: the state must be a basis state up to tol.
  Label readout_basis_label(double tol = kReadoutTol) const {
    double best = -1, norm2 = 0;
    Label best_label;
    for_each_amplitude([&](const Label& l, Amplitude a) {
      double w = std::norm(a);
      norm2 += w;
      if (w > best) {
        best = w;
        best_label = l;
      }
    });
    if (best < 0 || best < (1.0 - tol) * norm2)
      throw std::runtime_error("state: not a basis state at readout");
    return best_label;
  }

  std::vector<Symbol> register_slice(const Label& l, std::size_t reg) const {
    layout_.check_reg(reg);
    auto b = l.begin() + layout_.offset(reg);
    return std::vector<Symbol>(b, b + layout_.size(reg));
  }

  void scale(Amplitude c) {
    if (sparse_)
      for (auto& [l, a] : map_) a *= c;
    else
      for (auto& a : dense_) a *= c;
  }

  void add_scaled(Amplitude c, const StateVector& other) {
    if (!(layout_ == other.layout_)) throw std::invalid_argument("state: layout mismatch");
    if (!sparse_) {
      StateVector o = other;
      o.to_dense();
      for (std::size_t i = 0; i < dense_.size(); ++i) dense_[i] += c * o.dense_[i];
      return;
    }
    if (other.sparse_) {
      for (const auto& [l, a] : other.map_) map_[l] += c * a;
    } else {
      StateVector self = *this;
      self.to_dense();
      for (std::size_t i = 0; i < self.dense_.size(); ++i)
        self.dense_[i] += c * other.dense_[i];
      *this = std::move(self);
    }
  }

  std::uint64_t label_to_index(const Label& l) const {
    const std::uint64_t q = layout_.field()->q();
    std::uint64_t idx = 0;
    for (auto s : l) idx = idx * q + s;
    return idx;
  }

  Label index_to_label(std::uint64_t idx) const {
    const std::uint64_t q = layout_.field()->q();
    Label l(layout_.total_symbols());
    for (std::size_t j = l.size(); j-- > 0;) {
      l[j] = static_cast<Symbol>(idx % q);
      idx /= q;
    }
    return l;
  }

 private:
  explicit StateVector(RegisterLayout layout) : layout_(std::move(layout)) {}

  std::vector<std::size_t> layout_sizes() const {
    std::vector<std::size_t> sizes(layout_.num_registers());
    for (std::size_t k = 0; k < sizes.size(); ++k) sizes[k] = layout_.size(k);
    return sizes;
  }

  void reorder_registers(const std::vector<std::size_t>& order) {
    std::vector<std::size_t> old_sizes = layout_sizes();
    std::vector<std::size_t> old_offsets(old_sizes.size());
    for (std::size_t k = 0; k < old_sizes.size(); ++k) old_offsets[k] = layout_.offset(k);
    std::vector<std::size_t> new_sizes(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_sizes[k] = old_sizes[order[k]];
    RegisterLayout next(layout_.field(), new_sizes, layout_.dense_cap());

    auto remap = [&](const Label& l) {
      Label nl;
      nl.reserve(l.size());
      for (std::size_t k = 0; k < order.size(); ++k) {
        auto b = l.begin() + old_offsets[order[k]];
        nl.insert(nl.end(), b, b + old_sizes[order[k]]);
      }
      return nl;
    };

    if (sparse_) {
      std::map<Label, Amplitude> nm;
      for (auto& [l, a] : map_) nm[remap(l)] = a;
      map_ = std::move(nm);
      layout_ = std::move(next);
    } else {
      std::vector<Amplitude> nd(dense_.size());
      StateVector probe(next);  // for index math on the new layout
      for (std::uint64_t i = 0; i < dense_.size(); ++i) {
        if (dense_[i] == Amplitude{}) continue;
        nd[probe.label_to_index(remap(index_to_label(i)))] = dense_[i];
      }
      dense_ = std::move(nd);
      layout_ = std::move(next);
    }
  }

  void qft_symbol(std::size_t pos, bool inverse) {
    const Field& fld = *layout_.field();
    const std::uint32_t q = fld.q();
    const double scale = 1.0 / std::sqrt(double(q));
    if (sparse_) {
      if (map_.size() * q > kSparseSupportCap)
        throw std::runtime_error("state: sparse support cap exceeded in QFT");
      std::map<Label, Amplitude> nm;
      for (auto& [l, a] : map_) {
        Label nl = l;
        const FieldElem x{l[pos]};
        for (std::uint32_t y = 0; y < q; ++y) {
          Amplitude ph = fld.char_e(fld.mul(x, FieldElem{y}));
          if (inverse) ph = std::conj(ph);
          nl[pos] = y;
          nm[nl] += a * ph * scale;
        }
      }
      map_ = std::move(nm);
      prune();
      maybe_promote();
    } else {
      const std::uint64_t dim = dense_.size();
      std::uint64_t stride = 1;
      for (std::size_t j = layout_.total_symbols(); j-- > pos + 1;) stride *= q;
      std::vector<Amplitude> buf(q);
      for (std::uint64_t block = 0; block < dim; block += stride * q) {
        for (std::uint64_t off = 0; off < stride; ++off) {
          const std::uint64_t base = block + off;
          for (std::uint32_t y = 0; y < q; ++y) {
            Amplitude acc{};
            for (std::uint32_t x = 0; x < q; ++x) {
              Amplitude ph = fld.char_e(fld.mul(FieldElem{x}, FieldElem{y}));
              if (inverse) ph = std::conj(ph);
              acc += ph * dense_[base + x * stride];
            }
            buf[y] = acc * scale;
          }
          for (std::uint32_t y = 0; y < q; ++y) dense_[base + y * stride] = buf[y];
        }
      }
    }
  }

  void maybe_promote() {
    if (!sparse_) return;
    if (!layout_.can_densify()) return;
    if (map_.size() * 4 > *layout_.dense_dim()) to_dense();
  }

  void check_distinct(std::size_t a, std::size_t b) const {
    layout_.check_reg(a);
    layout_.check_reg(b);
    if (a == b) throw std::invalid_argument("state: registers must be distinct");
  }

  void validate_label(const Label& l) const {
    if (l.size() != layout_.total_symbols())
      throw std::invalid_argument("state: label has wrong length");
    for (auto s : l)
      if (s >= layout_.field()->q())
        throw std::invalid_argument("state: label symbol out of range");
  }

  RegisterLayout layout_;
  bool sparse_ = true;
  std::map<Label, Amplitude> map_;
  std::vector<Amplitude> dense_;
};

using Circuit = std::function<void(StateVector&)>;

inline Circuit compose(std::vector<Circuit> steps) {
  return [steps = std::move(steps)](StateVector& s) {
    for (const auto& step : steps) step(s);
  };
}

// Max over basis inputs of ||A|x> - B|x>||_2. Exhaustive, so the layout must
// be dense-capable.
inline double operator_distance(const Circuit& a, const Circuit& b,
                                const RegisterLayout& layout) {
  auto dim = layout.dense_dim();
  if (!dim || *dim > layout.dense_cap())
    throw std::runtime_error("operator_distance: layout too large to enumerate");
  double worst = 0;
  StateVector probe = StateVector::basis(layout, Label(layout.total_symbols(), 0));
  for (std::uint64_t i = 0; i < *dim; ++i) {
    Label l = probe.index_to_label(i);
    StateVector sa = StateVector::basis(layout, l);
    StateVector sb = sa;
    a(sa);
    b(sb);
    worst = std::max(worst, StateVector::distance(sa, sb));
  }
  return worst;
}

}  // namespace mvq
