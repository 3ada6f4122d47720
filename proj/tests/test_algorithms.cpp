#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "mvq/algorithms.hpp"
#include "mvq/parallel.hpp"

using namespace mvq;

namespace {

FieldElem direct_trace(const MatrixFq& m) {
  FieldElem t = m.field()->zero();
  for (std::size_t i = 0; i < m.rows(); ++i) t = m.field()->add(t, m.at(i, i));
  return t;
}

std::vector<std::pair<std::size_t, std::size_t>> true_equal_rows(const MatrixFq& m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.rows(); ++j) {
      bool eq = true;
      for (std::size_t c = 0; c < m.cols() && eq; ++c) eq = m.at(i, c) == m.at(j, c);
      if (eq) out.emplace_back(i, j);
    }
  return out;
}

MatrixFq with_planted_rows(FieldPtr f, std::size_t rows, std::size_t cols, Rng& rng,
                           std::size_t& src, std::size_t& dst) {
  MatrixFq m = random_matrix(f, rows, cols, rng);
  src = rng.below(rows);
  do {
    dst = rng.below(rows);
  } while (dst == src);
  for (std::size_t c = 0; c < cols; ++c) m.at(dst, c) = m.at(src, c);
  return m;
}

}  // namespace

TEST_CASE("trace algorithm is exact at half the trivial query count") {
  Rng rng(211);
  SECTION("exhaustive over small sizes, both oracle flavors") {
    FieldPtr f = make_field_q(2);
    for (std::size_t n = 1; n <= 3; ++n) {
      auto total = matrix_space_size(2, n, n);
      for (std::uint64_t idx = 0; idx < *total; ++idx) {
        MatrixFq m = matrix_from_index(f, n, n, idx);
        for (QueryFlavor fl : {QueryFlavor::standard, QueryFlavor::phase}) {
          auto o = make_mv_oracle(m, fl);
          TraceResult r = quantum_trace_f2(o, rng);
          REQUIRE(r.value == direct_trace(m));
          REQUIRE(r.probability >= 1.0 - kReadoutTol);
          REQUIRE(r.queries_used == (n + 1) / 2);
        }
      }
    }
  }
  SECTION("random four-dimensional instances") {
    FieldPtr f = make_field_q(2);
    for (int it = 0; it < 50; ++it) {
      MatrixFq m = random_matrix(f, 4, 4, rng);
      auto o = make_mv_oracle(m, QueryFlavor::phase);
      TraceResult r = quantum_trace_f2(o, rng);
      REQUIRE(r.value == direct_trace(m));
      REQUIRE(r.queries_used == 2);
    }
  }
  SECTION("input validation") {
    FieldPtr f3 = make_field_q(3);
    auto bad_field = make_mv_oracle(MatrixFq(f3, 2, 2));
    REQUIRE_THROWS_AS(quantum_trace_f2(bad_field, rng), std::invalid_argument);
    FieldPtr f = make_field_q(2);
    auto rect = make_mv_oracle(MatrixFq(f, 2, 3));
    REQUIRE_THROWS_AS(quantum_trace_f2(rect, rng), std::invalid_argument);
    auto vmv = make_vmv_oracle(MatrixFq(f, 2, 2));
    REQUIRE_THROWS_AS(quantum_trace_f2(vmv, rng), std::invalid_argument);
  }
}

TEST_CASE("row and column sums cost one query") {
  SECTION("exhaustive over all small binary shapes") {
    FieldPtr f = make_field_q(2);
    for (std::size_t m = 1; m <= 3; ++m)
      for (std::size_t n = 1; n <= 3; ++n) {
        auto total = matrix_space_size(2, m, n);
        for (std::uint64_t idx = 0; idx < *total; ++idx) {
          MatrixFq mat = matrix_from_index(f, m, n, idx);
          auto o = make_mv_oracle(mat);
          SumsResult rows = row_sums(o);
          REQUIRE(rows.sums == mul(mat, ones_vector(f, n)));
          REQUIRE(rows.queries_used == 1);
          SumsResult cols = column_sums(o);
          REQUIRE(cols.sums == mul(mat.transpose(), ones_vector(f, m)));
          REQUIRE(cols.queries_used == 1);
        }
      }
  }
  SECTION("large rectangular instances run through the direct path") {
    FieldPtr f = make_field_q(2);
    Rng rng(223);
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{32, 64}, {64, 32}}) {
      MatrixFq mat = random_matrix(f, m, n, rng);
      auto o = make_mv_oracle(mat);
      REQUIRE(row_sums(o).sums == mul(mat, ones_vector(f, n)));
      SumsResult cols = column_sums(o);
      REQUIRE(cols.sums == mul(mat.transpose(), ones_vector(f, m)));
      REQUIRE(cols.queries_used == 1);
    }
  }
  SECTION("extension fields") {
    FieldPtr f = make_field_q(9);
    Rng rng(227);
    MatrixFq mat = random_matrix(f, 3, 3, rng);
    auto o = make_mv_oracle(mat);
    REQUIRE(row_sums(o).sums == mul(mat, ones_vector(f, 3)));
    REQUIRE(column_sums(o).sums == mul(mat.transpose(), ones_vector(f, 3)));
  }
}

TEST_CASE("duplicate row detection never misses a planted pair") {
  FieldPtr f = make_field_q(2);
  Rng rng(229);
  const std::size_t instances = 300;
  for (std::size_t it = 0; it < instances; ++it) {
    std::size_t src = 0, dst = 0;
    MatrixFq m = with_planted_rows(f, 8, 32, rng, src, dst);
    auto o = make_mv_oracle(m);
    CollisionResult r = identical_rows(o, rng, 6);
    REQUIRE(r.trials == 6);
    REQUIRE(r.queries_used == 6);
    // Equal rows produce equal signatures unconditionally, so every truly
    // equal pair must be reported.
    auto truth = true_equal_rows(m);
    for (const auto& p : truth)
      REQUIRE(std::find(r.pairs.begin(), r.pairs.end(), p) != r.pairs.end());
    auto want = std::minmax(src, dst);
    REQUIRE(std::find(r.pairs.begin(), r.pairs.end(),
                      std::make_pair(want.first, want.second)) != r.pairs.end());
  }
}

TEST_CASE("duplicate row false positives stay near the collision bound") {
  // With 6 probes a distinct pair collides with probability 2^-6, so the
  // expected number of false pairs per duplicate-free 8x32 instance is
  // C(8,2)/64 = 0.4375; the observed mean must sit inside 3 sigma.
  FieldPtr f = make_field_q(2);
  Rng rng(233);
  const std::size_t instances = 300;
  double fp_total = 0;
  for (std::size_t it = 0; it < instances; ++it) {
    MatrixFq m = random_matrix(f, 8, 32, rng);
    auto o = make_mv_oracle(m);
    CollisionResult r = identical_rows(o, rng, 6);
    auto truth = true_equal_rows(m);
    for (const auto& p : r.pairs)
      if (std::find(truth.begin(), truth.end(), p) == truth.end()) fp_total += 1;
  }
  const double mean = fp_total / double(instances);
  const double expect = 28.0 / 64.0;
  const double sigma = std::sqrt(28.0 * (1.0 / 64.0) * (63.0 / 64.0) / double(instances));
  REQUIRE(mean <= expect + 3 * sigma);
  REQUIRE(mean >= expect - 3 * sigma);
}

TEST_CASE("duplicate column detection works through the transpose") {
  FieldPtr f = make_field_q(2);
  Rng rng(239);
  for (std::size_t it = 0; it < 100; ++it) {
    MatrixFq m = random_matrix(f, 32, 8, rng);
    std::size_t src = rng.below(8), dst = (src + 1 + rng.below(7)) % 8;
    for (std::size_t r = 0; r < 32; ++r) m.at(r, dst) = m.at(r, src);
    auto o = make_mv_oracle(m);
    CollisionResult res = identical_columns(o, rng, 6);
    REQUIRE(res.queries_used == 6);
    auto want = std::minmax(src, dst);
    REQUIRE(std::find(res.pairs.begin(), res.pairs.end(),
                      std::make_pair(want.first, want.second)) != res.pairs.end());
  }
}

TEST_CASE("majority bits from a single real-weighted query") {
  SECTION("exhaustive three-by-three sweep") {
    for (std::uint64_t idx = 0; idx < 512; ++idx) {
      std::vector<std::vector<int>> rows(3, std::vector<int>(3));
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) rows[i][j] = int((idx >> (3 * i + j)) & 1);
      RealBinaryOracle o(rows);
      MajorityResult mr = majority_rows(o);
      REQUIRE(mr.queries_used == 1);
      for (std::size_t i = 0; i < 3; ++i) {
        int ones = rows[i][0] + rows[i][1] + rows[i][2];
        REQUIRE(mr.bits[i] == (ones >= 2 ? 1 : 0));
        REQUIRE_FALSE(mr.tied[i]);  // odd row length cannot tie
      }
      MajorityResult mc = majority_columns(o);
      REQUIRE(mc.queries_used == 1);
      for (std::size_t j = 0; j < 3; ++j) {
        int ones = rows[0][j] + rows[1][j] + rows[2][j];
        REQUIRE(mc.bits[j] == (ones >= 2 ? 1 : 0));
      }
    }
  }
  SECTION("even lengths can tie") {
    RealBinaryOracle o({{1, 0}, {1, 1}});
    MajorityResult mr = majority_rows(o);
    REQUIRE(mr.tied[0]);
    REQUIRE(mr.bits[0] == 0);  // ties report 0 and raise the flag
    REQUIRE_FALSE(mr.tied[1]);
    REQUIRE(mr.bits[1] == 1);
  }
  SECTION("entries outside 0/1 are rejected") {
    using Rows = std::vector<std::vector<int>>;
    REQUIRE_THROWS_AS(RealBinaryOracle(Rows{{2}}), std::invalid_argument);
    REQUIRE_THROWS_AS(RealBinaryOracle(Rows{{0, 1}, {0}}), std::invalid_argument);
  }
}

TEST_CASE("scalar-access sums pay one query per entry") {
  Rng rng(241);
  for (std::uint64_t q : {2ull, 3ull}) {
    FieldPtr f = make_field_q(q);
    MatrixFq m = random_matrix(f, 3, 4, rng);
    auto o = make_vmv_oracle(m);
    SumsResult rows = vmv_row_sums(o);
    REQUIRE(rows.sums == mul(m, ones_vector(f, 4)));
    REQUIRE(rows.queries_used == 3);
    SumsResult cols = vmv_column_sums(o);
    REQUIRE(cols.sums == mul(m.transpose(), ones_vector(f, 3)));
    REQUIRE(cols.queries_used == 4);

    auto mv = make_mv_oracle(m);
    REQUIRE_THROWS_AS(vmv_row_sums(mv), std::invalid_argument);
  }
}

TEST_CASE("border padding matches the explicitly bordered matrix") {
  Rng rng(251);
  for (std::uint64_t q : {2ull, 3ull}) {
    FieldPtr f = make_field_q(q);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{2, 3}, {3, 3}}) {
      MatrixFq m = random_matrix(f, rows, cols, rng);
      VectorFq u = random_vector(f, cols, rng);
      VectorFq v = random_vector(f, rows, rng);
      FieldElem a{static_cast<Symbol>(rng.below(q))};
      MatrixFq big = bordered_matrix(m, u, v, a);
      REQUIRE(big.at(0, 0) == a);
      REQUIRE(big.at(1, 1) == m.at(0, 0));

      auto base = make_mv_oracle(m);
      auto padded = padded_mv_oracle(base, u, v, a);
      RegisterLayout layout(f, {cols + 1, rows + 1});
      REQUIRE(operator_distance(mv_standard_circuit(padded),
                                mv_standard_circuit(make_mv_oracle(big)),
                                layout) < kEquivalenceTol);
      VectorFq probe = random_vector(f, cols + 1, rng);
      REQUIRE(padded->query(probe) == mul(big, probe));
    }
  }
}

TEST_CASE("vmv border padding matches the explicitly bordered matrix") {
  Rng rng(257);
  FieldPtr f = make_field_q(3);
  MatrixFq m = random_matrix(f, 2, 2, rng);
  VectorFq u = random_vector(f, 2, rng);
  VectorFq v = random_vector(f, 2, rng);
  FieldElem a{2};
  MatrixFq big = bordered_matrix(m, u, v, a);
  auto padded = padded_vmv_oracle(make_vmv_oracle(m), u, v, a);
  RegisterLayout layout(f, {3, 3, 1});
  REQUIRE(operator_distance(vmv_standard_circuit(padded),
                            vmv_standard_circuit(make_vmv_oracle(big)),
                            layout) < kEquivalenceTol);
}

TEST_CASE("padding charges one base query per application") {
  FieldPtr f = make_field_q(2);
  Rng rng(263);
  MatrixFq m = random_matrix(f, 2, 2, rng);
  auto base = make_mv_oracle(m);
  auto padded = padded_mv_oracle(base, random_vector(f, 2, rng), random_vector(f, 2, rng),
                                 FieldElem{1});
  padded->query(random_vector(f, 3, rng));
  REQUIRE(base->queries() == 1);
  REQUIRE(padded->queries() == 1);

  REQUIRE_THROWS_AS(
      padded_mv_oracle(base, random_vector(f, 3, rng), random_vector(f, 2, rng), FieldElem{0}),
      std::invalid_argument);
  auto vmv = make_vmv_oracle(m);
  REQUIRE_THROWS_AS(
      padded_mv_oracle(vmv, random_vector(f, 2, rng), random_vector(f, 2, rng), FieldElem{0}),
      std::invalid_argument);
}

TEST_CASE("reference solver learns the matrix and solves exactly") {
  FieldPtr f = make_field_q(3);
  Rng rng(269);
  MatrixFq m = sample_matrix_of_rank(f, 4, 4, 4, rng);
  auto o = make_mv_oracle(m);
  VectorFq b = random_vector(f, 4, rng);
  SolverResult sr = reference_linear_solver(o, b);
  REQUIRE(sr.learned == m);
  REQUIRE(sr.queries_used == 4);
  REQUIRE(sr.solution.has_value());
  REQUIRE(mul(m, *sr.solution) == b);

  MatrixFq sing = sample_matrix_of_rank(f, 4, 4, 2, rng);
  auto os = make_mv_oracle(sing);
  SolverResult none = reference_linear_solver(os, b);
  REQUIRE_FALSE(none.solution.has_value());
  REQUIRE(none.learned == sing);

  auto rect = make_mv_oracle(MatrixFq(f, 2, 3));
  REQUIRE_THROWS_AS(reference_linear_solver(rect, b), std::invalid_argument);
}

TEST_CASE("full-rank decision through the padded solver") {
  FieldPtr f = make_field_q(2);
  const std::size_t n = 3;

  SECTION("exhaustive binary three-by-three sweep") {
    std::size_t eligible = 0, decided_count = 0;
    for (std::uint64_t idx = 0; idx < 512; ++idx) {
      MatrixFq m = matrix_from_index(f, n, n, idx);
      std::size_t rk = rank(m);
      Rng rng(1000 + idx);
      auto o = make_mv_oracle(m);
      RankReductionResult r = fullrank_via_solver(o, rng, 12);
      REQUIRE(r.queries_used == r.attempts * (n + 1));
      REQUIRE(r.audits.size() == r.attempts);

      // Replay every audited border against the hidden matrix.
      for (const auto& audit : r.audits) {
        MatrixFq big = bordered_matrix(m, audit.u, audit.v, audit.a);
        REQUIRE(audit.invertible == (rank(big) == n + 1));
      }

      if (rk <= n - 2) {
        // A bordered matrix gains at most two ranks, so padding can never
        // succeed and no verdict is possible.
        REQUIRE_FALSE(r.full_rank.has_value());
        REQUIRE(r.attempts == 12);
      } else {
        ++eligible;
        if (r.full_rank.has_value()) {
          ++decided_count;
          REQUIRE(*r.full_rank == (rk == n));
          REQUIRE(r.solution.has_value());
          MatrixFq big = bordered_matrix(m, r.audits.back().u, r.audits.back().v,
                                         r.audits.back().a);
          REQUIRE(mul(big, *r.solution) == unit_vector(f, n + 1, 0));
        }
      }
    }
    // Each attempt succeeds with probability >= 1/4, so 12 attempts decide
    // all but a few percent of the eligible instances.
    REQUIRE(double(decided_count) >= 0.9 * double(eligible));
  }

  SECTION("identity matrix is always judged full-rank") {
    Rng rng(271);
    auto o = make_mv_oracle(MatrixFq::identity(make_field_q(3), 4));
    RankReductionResult r = fullrank_via_solver(o, rng, 16);
    REQUIRE(r.full_rank.has_value());
    REQUIRE(*r.full_rank);
  }

  SECTION("pluggable solver is honored") {
    Rng rng(277);
    auto o = make_mv_oracle(MatrixFq::identity(f, n));
    std::size_t calls = 0;
    LinearSolver refusing = [&](const OraclePtr&, const VectorFq&) {
      ++calls;
      return std::optional<VectorFq>{};
    };
    RankReductionResult r = fullrank_via_solver(o, refusing, rng, 5);
    REQUIRE(calls == 5);
    REQUIRE(r.attempts == 5);
    REQUIRE_FALSE(r.full_rank.has_value());
  }
}

TEST_CASE("per-instance generators make parallel sweeps deterministic") {
  FieldPtr f = make_field_q(2);
  auto run = [&](unsigned threads) {
    return parallel_map<std::uint32_t>(64, threads, [&](std::size_t i) {
      Rng rng = instance_rng(99, i);
      MatrixFq m = random_matrix(f, 3, 3, rng);
      auto o = make_mv_oracle(m, QueryFlavor::phase);
      return quantum_trace_f2(o, rng).value.v;
    });
  };
  auto seq = run(1);
  REQUIRE(run(4) == seq);
  REQUIRE(run(7) == seq);
}
