#include "jcompat/feasibility.hpp"

#include "jcompat/rng.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include <doctest.h>

using namespace jcompat;

namespace {

std::shared_ptr<const DctMatrix> shared_matrix(BlockShape shape) {
  return std::make_shared<DctMatrix>(shape);
}

DctBlock compress_pixels(BlockShape shape, std::vector<int> values,
                         const DctMatrix &m) {
  QuantTable q = quant_table_qf100(shape);
  return compress(PixelBlock(shape, std::move(values)), q, m).block;
}

// Pixel block with a deliberately bounded range so decompression rarely
// leaves [0, 255].
std::vector<int> random_pixels(BlockShape shape, Rng &rng) {
  std::vector<int> values(shape.size());
  for (auto &v : values)
    v = 20 + static_cast<int>(rng.below(216));
  return values;
}

} // namespace

TEST_CASE("constraint rows pair the transform with its negation") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {195, 84}, *m);
  ConstraintSystem sys = build_constraints(c, kDefaultEps, m);

  CHECK(sys.vars() == 2);
  CHECK(sys.rows() == 4);

  const double r = 1.0 / std::sqrt(2.0);
  CHECK(sys.a(0, 0) == doctest::Approx(r).epsilon(1e-14));
  CHECK(sys.a(0, 1) == doctest::Approx(r).epsilon(1e-14));
  CHECK(sys.a(1, 0) == doctest::Approx(r).epsilon(1e-14));
  CHECK(sys.a(1, 1) == doctest::Approx(-r).epsilon(1e-14));
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 2; ++col)
      CHECK(sys.a(row + 2, col) == doctest::Approx(-sys.a(row, col)));

  // b pairs to the quantization step: (Me + q/2) + (-Me + q/2) = q.
  for (int f = 0; f < sys.vars(); ++f)
    CHECK(sys.b(f) + sys.b(f + sys.vars()) ==
          doctest::Approx(c.quant.at(f)).epsilon(1e-12));
  CHECK(sys.b(0) == doctest::Approx(0.0563493).epsilon(1e-5));
  CHECK(sys.b(1) == doctest::Approx(0.2817447).epsilon(1e-5));
  CHECK(sys.b(2) == doctest::Approx(0.9436507).epsilon(1e-5));
  CHECK(sys.b(3) == doctest::Approx(0.7182553).epsilon(1e-5));
}

TEST_CASE("strictness follows the coefficient signs") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  QuantTable q = quant_table_qf100(shape);

  // Both coefficients nonnegative: the lower rows are strict.
  ConstraintSystem pos =
      build_constraints(DctBlock(shape, {16, 78}, q), kDefaultEps, m);
  CHECK_FALSE(pos.strict(0));
  CHECK_FALSE(pos.strict(1));
  CHECK(pos.strict(2));
  CHECK(pos.strict(3));

  // A negative coefficient flips the strict side of its pair.
  ConstraintSystem mixed =
      build_constraints(DctBlock(shape, {16, -78}, q), kDefaultEps, m);
  CHECK_FALSE(mixed.strict(0));
  CHECK(mixed.strict(1));
  CHECK(mixed.strict(2));
  CHECK_FALSE(mixed.strict(3));

  int strict_rows = 0;
  for (int row = 0; row < mixed.rows(); ++row)
    strict_rows += mixed.strict(row) ? 1 : 0;
  CHECK(strict_rows == mixed.vars());
}

TEST_CASE("closing a system drops eps and all strictness") {
  BlockShape shape(2, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {10, 200, 30, 90}, *m);
  ConstraintSystem sys = build_constraints(c, 1e-6, m);
  CHECK(sys.eps() == 1e-6);

  ConstraintSystem closed = sys.closed();
  CHECK(closed.eps() == 0.0);
  for (int row = 0; row < closed.rows(); ++row)
    CHECK_FALSE(closed.strict(row));
  for (int row = 0; row < closed.rows(); ++row)
    CHECK(closed.b(row) == sys.b(row));
}

TEST_CASE("candidate membership matches the row inequalities") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {195, 84}, *m);
  ConstraintSystem sys = build_constraints(c, kDefaultEps, m);

  CHECK(sys.satisfies(KVector{{-1, 0}}, true));
  CHECK(sys.satisfies(KVector{{-1, 0}}, false));
  CHECK(sys.satisfies(KVector{{0, 0}}, true));
  CHECK_FALSE(sys.satisfies(KVector{{1, 0}}, false));
  CHECK_FALSE(sys.satisfies(KVector{{-2, 1}}, false));
  CHECK_THROWS_AS(sys.satisfies(KVector{{0}}, false), std::invalid_argument);
}

TEST_CASE("coordinate bounds box in both antecedent offsets") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {195, 84}, *m);
  ConstraintSystem sys = build_constraints(c, kDefaultEps, m);

  auto bounds = k_bounds(sys);
  REQUIRE(bounds.size() == 2);
  CHECK(bounds[0].first == -1);
  CHECK(bounds[0].second == 0);
  CHECK(bounds[1].first == 0);
  CHECK(bounds[1].second == 0);
}

TEST_CASE("reference search finds the first antecedent offset") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {195, 84}, *m);

  Verdict v = brute_force_antecedent(c, *m);
  REQUIRE(v.feasible());
  REQUIRE(v.k.has_value());
  CHECK(v.k->k == std::vector<int>{-1, 0});

  auto all = enumerate_antecedents(c, *m);
  REQUIRE(all.size() == 2);
  CHECK(all[0].k == std::vector<int>{-1, 0});
  CHECK(all[1].k == std::vector<int>{0, 0});
}

TEST_CASE("reference search refuses boxes above the enumeration cap") {
  BlockShape shape(4, 4);
  auto m = shared_matrix(shape);
  Rng rng(5);
  DctBlock c = compress_pixels(shape, random_pixels(shape, rng), *m);
  CHECK_THROWS_AS(brute_force_antecedent(c, *m), EnumerationCapError);
  CHECK_THROWS_AS(enumerate_antecedents(c, *m), EnumerationCapError);
}

TEST_CASE("candidate verification distinguishes all three outcomes") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  DctBlock c = compress_pixels(shape, {195, 84}, *m);

  CHECK(verify_antecedent(KVector{{-1, 0}}, c, *m) ==
        AntecedentCheck::Verified);
  CHECK(verify_antecedent(KVector{{0, 0}}, c, *m) ==
        AntecedentCheck::Verified);
  CHECK(verify_antecedent(KVector{{-1, -1}}, c, *m) ==
        AntecedentCheck::Mismatch);
  CHECK(verify_antecedent(KVector{{195, 0}}, c, *m) ==
        AntecedentCheck::OutOfRange);
  CHECK_THROWS_AS(verify_antecedent(KVector{{0}}, c, *m),
                  std::invalid_argument);
}

TEST_CASE("solver decides the two-pixel examples") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  QuantTable q = quant_table_qf100(shape);

  ConstraintSystem cover =
      build_constraints(compress_pixels(shape, {195, 84}, *m), kDefaultEps, m);
  Verdict cv = solve_feasibility(cover, Budget::unlimited());
  REQUIRE(cv.feasible());
  REQUIRE(cv.k.has_value());
  CHECK(verify_antecedent(*cv.k, cover.block(), *m) ==
        AntecedentCheck::Verified);

  ConstraintSystem modified =
      build_constraints(DctBlock(shape, {17, 77}, q), kDefaultEps, m);
  Verdict mv = solve_feasibility(modified, Budget::unlimited());
  CHECK(mv.infeasible());
}

TEST_CASE("solver agrees with the reference search on small blocks") {
  Rng rng(2024);
  for (BlockShape shape : {BlockShape(1, 2), BlockShape(2, 2), BlockShape(2, 3),
                           BlockShape(3, 3)}) {
    auto m = shared_matrix(shape);
    for (int trial = 0; trial < 75; ++trial) {
      DctBlock c = compress_pixels(shape, random_pixels(shape, rng), *m);
      if (trial % 2 == 1) {
        int f = static_cast<int>(rng.below(static_cast<std::uint64_t>(
            shape.size())));
        c.coeffs[f] += rng.coin() ? 1 : -1;
      }
      Verdict got =
          solve_feasibility(build_constraints(c, kDefaultEps, m),
                            Budget::unlimited());
      Verdict want = brute_force_antecedent(c, *m);
      CHECK(got.decided());
      CHECK(got.feasible() == want.feasible());
      if (got.feasible())
        CHECK(verify_antecedent(*got.k, c, *m) == AntecedentCheck::Verified);
    }
  }
}

TEST_CASE("infeasible verdicts survive re-solving the closed system") {
  Rng rng(77);
  BlockShape shape(2, 2);
  auto m = shared_matrix(shape);
  int infeasible_seen = 0;
  for (int trial = 0; trial < 200 && infeasible_seen < 25; ++trial) {
    DctBlock c = compress_pixels(shape, random_pixels(shape, rng), *m);
    int f = static_cast<int>(
        rng.below(static_cast<std::uint64_t>(shape.size())));
    c.coeffs[f] += rng.coin() ? 1 : -1;
    ConstraintSystem sys = build_constraints(c, kDefaultEps, m);
    Verdict v = solve_feasibility(sys, Budget::unlimited());
    if (!v.infeasible())
      continue;
    ++infeasible_seen;
    Verdict closed = solve_feasibility(sys.closed(), Budget::unlimited());
    CHECK(closed.infeasible());
  }
  CHECK(infeasible_seen >= 25);
}

TEST_CASE("equal inputs give equal verdicts and node counts") {
  Rng rng(31);
  BlockShape shape(3, 3);
  auto m = shared_matrix(shape);
  for (int trial = 0; trial < 20; ++trial) {
    DctBlock c = compress_pixels(shape, random_pixels(shape, rng), *m);
    if (trial % 2 == 1)
      c.coeffs[trial % shape.size()] += 1;
    ConstraintSystem sys = build_constraints(c, kDefaultEps, m);
    Verdict a = solve_feasibility(sys, Budget::unlimited());
    Verdict b = solve_feasibility(sys, Budget::unlimited());
    CHECK(a.kind == b.kind);
    CHECK(a.nodes == b.nodes);
    CHECK(a.k == b.k);
  }
}

TEST_CASE("raising a node budget never changes a decided verdict") {
  Rng rng(613);
  BlockShape shape(3, 3);
  auto m = shared_matrix(shape);
  const std::uint64_t budgets[] = {1, 4, 16, 64, 256, 1024, 8192, 1u << 20};
  for (int trial = 0; trial < 24; ++trial) {
    DctBlock c = compress_pixels(shape, random_pixels(shape, rng), *m);
    if (trial % 2 == 1) {
      int f = static_cast<int>(
          rng.below(static_cast<std::uint64_t>(shape.size())));
      c.coeffs[f] += rng.coin() ? 1 : -1;
    }
    ConstraintSystem sys = build_constraints(c, kDefaultEps, m);
    std::optional<Verdict> decided;
    for (std::uint64_t b : budgets) {
      Verdict v = solve_feasibility(sys, Budget::nodes(b));
      CHECK(v.nodes <= b);
      if (decided) {
        REQUIRE(v.decided());
        CHECK(v.kind == decided->kind);
        CHECK(v.nodes == decided->nodes);
      } else if (v.decided()) {
        decided = v;
      }
    }
    Verdict full = solve_feasibility(sys, Budget::unlimited());
    REQUIRE(decided.has_value());
    CHECK(full.kind == decided->kind);
    CHECK(full.nodes == decided->nodes);
  }
}

TEST_CASE("degenerate budgets are rejected") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  ConstraintSystem sys =
      build_constraints(compress_pixels(shape, {195, 84}, *m), kDefaultEps, m);
  CHECK_THROWS_AS(solve_feasibility(sys, Budget::nodes(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_feasibility(sys, Budget::seconds(0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_feasibility(sys, Budget::seconds(-1.0)),
                  std::invalid_argument);
}

TEST_CASE("coefficients decompressing far outside the pixel range are settled for free") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  QuantTable q = quant_table_qf100(shape);
  ConstraintSystem sys =
      build_constraints(DctBlock(shape, {400, 0}, q), kDefaultEps, m);
  Verdict v = solve_feasibility(sys, Budget::unlimited());
  CHECK(v.infeasible());
  CHECK(v.nodes == 0);
}

TEST_CASE("constraint construction validates its inputs") {
  BlockShape shape(1, 2);
  auto m = shared_matrix(shape);
  auto wrong = shared_matrix(BlockShape(2, 2));
  QuantTable q = quant_table_qf100(shape);
  DctBlock c(shape, {16, 78}, q);
  CHECK_THROWS_AS(build_constraints(c, kDefaultEps, wrong),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_constraints(c, 0.0, m), std::invalid_argument);
  CHECK_THROWS_AS(build_constraints(c, -1e-9, m), std::invalid_argument);
  std::vector<double> short_e{0.1};
  CHECK_THROWS_AS(build_constraints(c, short_e, kDefaultEps, m),
                  std::invalid_argument);
}
