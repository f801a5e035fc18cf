#include "jcompat/embedding.hpp"

#include "jcompat/image.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

using namespace jcompat;

namespace {

std::vector<DctBlock> compress_image(const GrayImage &img, BlockShape shape) {
  DctMatrix m = dct_matrix(shape);
  QuantTable q = quant_table_qf100(shape);
  std::vector<DctBlock> blocks;
  for (const auto &px : split_blocks(img, shape))
    blocks.push_back(compress(px, q, m).block);
  return blocks;
}

} // namespace

TEST_CASE("applying a change set shifts the named coefficients") {
  BlockShape shape(1, 2);
  QuantTable q = quant_table_qf100(shape);
  DctBlock c(shape, {16, 78}, q);
  ChangeSet set{{Change{0, 0, 1}, Change{0, 1, -1}}};
  DctBlock modified = apply_changes(c, set);
  CHECK(modified.coeffs == std::vector<int>{17, 77});
  CHECK(set.size() == 2);
  CHECK(set.blocks_touched() == 1);
}

TEST_CASE("change application validates block and index fields") {
  BlockShape shape(1, 2);
  QuantTable q = quant_table_qf100(shape);
  DctBlock c(shape, {16, 78}, q);
  CHECK_THROWS_AS(apply_changes(c, ChangeSet{{Change{1, 0, 1}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_changes(c, ChangeSet{{Change{0, 2, 1}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_changes(c, ChangeSet{{Change{0, -1, 1}}}),
                  std::invalid_argument);
}

TEST_CASE("random modification touches the requested number of positions") {
  BlockShape shape(3, 3);
  QuantTable q = quant_table_qf100(shape);
  DctBlock c(shape, {50, 3, -2, 0, 7, -9, 1, 0, 4}, q);
  Rng rng(8);
  for (int count = 0; count <= shape.size(); ++count) {
    auto [modified, set] = modify_random(c, count, rng);
    CHECK(static_cast<int>(set.size()) == count);
    std::set<int> positions;
    int coeff_delta_sum = 0;
    for (const Change &ch : set.changes) {
      CHECK(ch.block == 0);
      CHECK(ch.index >= 0);
      CHECK(ch.index < shape.size());
      CHECK((ch.delta == 1 || ch.delta == -1));
      CHECK(modified.coeffs[ch.index] == c.coeffs[ch.index] + ch.delta);
      positions.insert(ch.index);
      coeff_delta_sum += std::abs(ch.delta);
    }
    CHECK(static_cast<int>(positions.size()) == count);
    CHECK(coeff_delta_sum == count);
    for (int i = 0; i < shape.size(); ++i)
      if (!positions.count(i))
        CHECK(modified.coeffs[i] == c.coeffs[i]);
  }
  CHECK_THROWS_AS(modify_random(c, -1, rng), std::invalid_argument);
  CHECK_THROWS_AS(modify_random(c, shape.size() + 1, rng),
                  std::invalid_argument);
}

TEST_CASE("random modification can hit the DC position") {
  BlockShape shape(2, 2);
  QuantTable q = quant_table_qf100(shape);
  DctBlock c(shape, {10, 2, -3, 4}, q);
  Rng rng(3);
  bool dc_touched = false;
  for (int trial = 0; trial < 200 && !dc_touched; ++trial) {
    auto [modified, set] = modify_random(c, 1, rng);
    if (set.changes[0].index == 0)
      dc_touched = true;
  }
  CHECK(dc_touched);
}

TEST_CASE("nonzero AC census skips DC and zeros") {
  BlockShape shape(2, 2);
  QuantTable q = quant_table_qf100(shape);
  std::vector<DctBlock> blocks;
  blocks.emplace_back(shape, std::vector<int>{99, 0, 0, 0}, q);
  blocks.emplace_back(shape, std::vector<int>{0, 1, -2, 0}, q);
  blocks.emplace_back(shape, std::vector<int>{-5, 3, 0, 7}, q);
  CHECK(count_nzac(blocks) == 4);
  CHECK(count_nzac(std::span<const DctBlock>{}) == 0);
}

TEST_CASE("binary entropy hits its landmark values") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(binary_entropy(0.25) ==
        doctest::Approx(0.8112781244591328).epsilon(1e-13));
  CHECK(binary_entropy(0.11) ==
        doctest::Approx(0.4999159581645280).epsilon(1e-12));
  CHECK_THROWS_AS(binary_entropy(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(binary_entropy(1.1), std::invalid_argument);
}

TEST_CASE("change rate inverts binary entropy on the lower branch") {
  CHECK(change_rate_for_payload(0.0) == 0.0);
  CHECK(change_rate_for_payload(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  for (double alpha : {0.01, 0.05, 0.1, 0.25, 0.3, 0.5, 0.75, 0.99}) {
    double rate = change_rate_for_payload(alpha);
    CHECK(rate >= 0.0);
    CHECK(rate <= 0.5);
    CHECK(binary_entropy(rate) == doctest::Approx(alpha).epsilon(1e-12));
  }
  CHECK_THROWS_AS(change_rate_for_payload(-0.01), std::invalid_argument);
  CHECK_THROWS_AS(change_rate_for_payload(1.01), std::invalid_argument);
}

TEST_CASE("embedding changes the expected number of coefficients") {
  GrayImage img = gen_synthetic(21, 64, 64, 2);
  std::vector<DctBlock> blocks = compress_image(img, BlockShape(4, 4));
  std::int64_t nzac = count_nzac(blocks);
  REQUIRE(nzac > 0);

  for (double payload : {0.05, 0.1, 0.3}) {
    Rng rng(500 + static_cast<std::uint64_t>(payload * 100));
    auto [stego, set] = lsbm_embed(blocks, {payload, 0}, rng);
    double rate = change_rate_for_payload(payload);
    auto expected =
        static_cast<std::size_t>(std::llround(rate * static_cast<double>(nzac)));
    CHECK(set.size() == expected);
    CHECK(stego.size() == blocks.size());
  }
}

TEST_CASE("embedding touches only nonzero AC positions and never zeroes one") {
  GrayImage img = gen_synthetic(33, 48, 48, 1);
  std::vector<DctBlock> blocks = compress_image(img, BlockShape(4, 4));
  Rng rng(7);
  auto [stego, set] = lsbm_embed(blocks, {0.4, 0}, rng);

  std::set<std::pair<int, int>> positions;
  for (const Change &ch : set.changes) {
    CHECK((ch.delta == 1 || ch.delta == -1));
    CHECK(ch.index != 0);
    int before = blocks[ch.block].coeffs[ch.index];
    int after = stego[ch.block].coeffs[ch.index];
    CHECK(before != 0);
    CHECK(after != 0);
    CHECK(after == before + ch.delta);
    CHECK(positions.insert({ch.block, ch.index}).second);
  }
  CHECK(count_nzac(stego) == count_nzac(blocks));

  // Untouched positions are untouched.
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int i = 0; i < blocks[b].shape.size(); ++i)
      if (!positions.count({static_cast<int>(b), i}))
        CHECK(stego[b].coeffs[i] == blocks[b].coeffs[i]);
}

TEST_CASE("embedding is reproducible from its stream") {
  GrayImage img = gen_synthetic(9, 40, 40, 2);
  std::vector<DctBlock> blocks = compress_image(img, BlockShape(4, 4));
  Rng a(1234), b(1234);
  auto [stego_a, set_a] = lsbm_embed(blocks, {0.2, 0}, a);
  auto [stego_b, set_b] = lsbm_embed(blocks, {0.2, 0}, b);
  CHECK(stego_a == stego_b);
  REQUIRE(set_a.size() == set_b.size());
  for (std::size_t i = 0; i < set_a.size(); ++i) {
    CHECK(set_a.changes[i].block == set_b.changes[i].block);
    CHECK(set_a.changes[i].index == set_b.changes[i].index);
    CHECK(set_a.changes[i].delta == set_b.changes[i].delta);
  }
}

TEST_CASE("embedding validates payload and block list") {
  Rng rng(1);
  std::vector<DctBlock> empty;
  CHECK_THROWS_AS(lsbm_embed(empty, {0.1, 0}, rng), std::invalid_argument);

  BlockShape shape(2, 2);
  QuantTable q = quant_table_qf100(shape);
  std::vector<DctBlock> blocks{DctBlock(shape, {5, 1, -2, 3}, q)};
  CHECK_THROWS_AS(lsbm_embed(blocks, {-0.1, 0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(lsbm_embed(blocks, {1.5, 0}, rng), std::invalid_argument);

  auto [stego, set] = lsbm_embed(blocks, {0.0, 0}, rng);
  CHECK(set.size() == 0);
  CHECK(stego == blocks);
}
