#pragma once

#include "jcompat/codec.hpp"
#include "jcompat/rng.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace jcompat {

// One coefficient touched by an embedding: block index within the image,
// flattened frequency index within the block, and the applied +1/-1.
struct Change {
  int block = 0;
  int index = 0;
  int delta = 0;
};

struct ChangeSet {
  std::vector<Change> changes; // positions are distinct

  std::size_t size() const { return changes.size(); }
  // Number of distinct blocks touched.
  int blocks_touched() const;
};

struct EmbeddingParams {
  double payload = 0.0;   // bits per nonzero AC coefficient
  std::uint64_t seed = 0; // stream identity, for bookkeeping
};

// Applies a change set to a single block (all changes must carry block 0).
DctBlock apply_changes(const DctBlock &c, const ChangeSet &set);

// Adds +1 or -1 (fair coin) to `count` distinct coefficient positions chosen
// uniformly over the whole block, DC included. count must be in [0, nm].
std::pair<DctBlock, ChangeSet> modify_random(const DctBlock &c, int count,
                                             Rng &rng);

// Nonzero AC coefficients across the blocks (index 0 of each block is DC).
std::int64_t count_nzac(std::span<const DctBlock> blocks);

// Binary entropy of beta in bits, H(0) = H(1) = 0.
double binary_entropy(double beta);

// Inverse of binary_entropy on [0, 1/2]: the per-coefficient change rate
// that carries `alpha` bits per coefficient under optimal +-1 coding.
double change_rate_for_payload(double alpha);

// Simulates +-1 embedding at params.payload bits per nonzero AC coefficient:
// round(rate * nzac) changes at distinct nonzero-AC positions drawn uniformly
// across the image. A +1/-1 is a fair coin, except that a change that would
// zero a coefficient is flipped away from zero, so the nonzero-AC count is
// preserved and positions stay valid.
std::pair<std::vector<DctBlock>, ChangeSet>
lsbm_embed(const std::vector<DctBlock> &blocks, const EmbeddingParams &params,
           Rng &rng);

} // namespace jcompat
