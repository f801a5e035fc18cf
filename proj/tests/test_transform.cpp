#include "jcompat/transform.hpp"

#include "jcompat/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

using namespace jcompat;

namespace {

double max_gram_deviation(const DctMatrix &m) {
  int nm = m.size();
  double worst = 0.0;
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nm; ++j) {
      double dot = 0.0;
      for (int f = 0; f < nm; ++f)
        dot += m.at(f, i) * m.at(f, j);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

} // namespace

TEST_CASE("block shape validates dimensions") {
  CHECK_THROWS_AS(BlockShape(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(BlockShape(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(BlockShape(-2, 3), std::invalid_argument);
  CHECK(BlockShape(3, 5).size() == 15);
  CHECK(BlockShape(2, 2) == BlockShape(2, 2));
  CHECK_FALSE(BlockShape(2, 3) == BlockShape(3, 2));
}

TEST_CASE("transform matrix is orthonormal") {
  for (BlockShape shape : {BlockShape(1, 1), BlockShape(1, 2), BlockShape(2, 2),
                           BlockShape(2, 3), BlockShape(3, 2), BlockShape(3, 3),
                           BlockShape(4, 4), BlockShape(5, 5), BlockShape(6, 6),
                           BlockShape(7, 5), BlockShape(8, 8)}) {
    DctMatrix m = dct_matrix(shape);
    CHECK(max_gram_deviation(m) < 1e-12);
  }
}

TEST_CASE("8x8 DC basis entry is 1/8") {
  DctMatrix m = dct_matrix(BlockShape(8, 8));
  for (int p = 0; p < 64; ++p)
    CHECK(m.at(0, p) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("matrix rows expose the same entries as at()") {
  DctMatrix m = dct_matrix(BlockShape(3, 4));
  for (int f = 0; f < m.size(); ++f) {
    auto row = m.row(f);
    REQUIRE(row.size() == static_cast<std::size_t>(m.size()));
    for (int p = 0; p < m.size(); ++p)
      CHECK(row[p] == m.at(f, p));
  }
}

TEST_CASE("forward and inverse transforms invert each other") {
  DctMatrix m = dct_matrix(BlockShape(5, 7));
  Rng rng(17);
  std::vector<double> spatial(m.size()), freq(m.size()), back(m.size());
  for (auto &v : spatial)
    v = rng.unit() * 255.0 - 128.0;
  m.forward(spatial, freq);
  m.inverse(freq, back);
  for (int i = 0; i < m.size(); ++i)
    CHECK(back[i] == doctest::Approx(spatial[i]).epsilon(1e-12));
}

TEST_CASE("rounding is half away from zero") {
  CHECK(round_half_away(0.0) == 0);
  CHECK(round_half_away(0.5) == 1);
  CHECK(round_half_away(-0.5) == -1);
  CHECK(round_half_away(1.5) == 2);
  CHECK(round_half_away(-1.5) == -2);
  CHECK(round_half_away(2.4) == 2);
  CHECK(round_half_away(-2.4) == -2);
  CHECK(round_half_away(2.5) == 3);
  CHECK(round_half_away(-2.5) == -3);
  CHECK(round_half_away(127.49999999) == 127);
}

TEST_CASE("rounding rejects non-finite input") {
  CHECK_THROWS_AS(round_half_away(std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  CHECK_THROWS_AS(round_half_away(std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(round_half_away(-std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("qf100 table is all ones") {
  QuantTable q = quant_table_qf100(BlockShape(6, 6));
  REQUIRE(q.size() == 36);
  for (int f = 0; f < q.size(); ++f)
    CHECK(q.at(f) == 1);
}

TEST_CASE("quant table validates steps") {
  CHECK_THROWS_AS(QuantTable(BlockShape(2, 2), {1, 1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(QuantTable(BlockShape(2, 2), {1, 1, 0, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(QuantTable(BlockShape(2, 2), {1, 1, -3, 1}),
                  std::invalid_argument);
  QuantTable q(BlockShape(2, 2), {1, 2, 3, 4});
  CHECK(q.at(3) == 4);
  CHECK(q.steps().size() == 4);
}
