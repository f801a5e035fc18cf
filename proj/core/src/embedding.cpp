#include "jcompat/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace jcompat {

int ChangeSet::blocks_touched() const {
  std::vector<int> ids;
  ids.reserve(changes.size());
  for (const Change &c : changes)
    ids.push_back(c.block);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return static_cast<int>(ids.size());
}

DctBlock apply_changes(const DctBlock &c, const ChangeSet &set) {
  DctBlock out = c;
  for (const Change &ch : set.changes) {
    if (ch.block != 0)
      throw std::invalid_argument("apply_changes: change targets another block");
    if (ch.index < 0 || ch.index >= c.shape.size())
      throw std::invalid_argument("apply_changes: index outside block");
    if (ch.delta != 1 && ch.delta != -1)
      throw std::invalid_argument("apply_changes: delta must be +-1");
    out.coeffs[ch.index] += ch.delta;
  }
  return out;
}

std::pair<DctBlock, ChangeSet> modify_random(const DctBlock &c, int count,
                                             Rng &rng) {
  int nm = c.shape.size();
  if (count < 0 || count > nm)
    throw std::invalid_argument("modify_random: count outside [0, nm]");

  std::vector<int> positions(nm);
  for (int i = 0; i < nm; ++i)
    positions[i] = i;

  ChangeSet set;
  for (int t = 0; t < count; ++t) {
    int pick = t + rng.range(0, nm - 1 - t);
    std::swap(positions[t], positions[pick]);
    int delta = rng.coin() ? 1 : -1;
    set.changes.push_back({0, positions[t], delta});
  }
  return {apply_changes(c, set), std::move(set)};
}

std::int64_t count_nzac(std::span<const DctBlock> blocks) {
  std::int64_t n = 0;
  for (const DctBlock &b : blocks)
    for (int i = 1; i < b.shape.size(); ++i)
      if (b.coeffs[i] != 0)
        ++n;
  return n;
}

double binary_entropy(double beta) {
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("binary_entropy: beta outside [0, 1]");
  if (beta == 0.0 || beta == 1.0)
    return 0.0;
  return -beta * std::log2(beta) - (1.0 - beta) * std::log2(1.0 - beta);
}

double change_rate_for_payload(double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("change_rate_for_payload: alpha outside [0, 1]");
  if (alpha == 0.0)
    return 0.0;
  if (alpha == 1.0)
    return 0.5;
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    if (binary_entropy(mid) < alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<std::vector<DctBlock>, ChangeSet>
lsbm_embed(const std::vector<DctBlock> &blocks, const EmbeddingParams &params,
           Rng &rng) {
  if (blocks.empty())
    throw std::invalid_argument("lsbm_embed: no blocks");
  if (params.payload < 0.0 || params.payload > 1.0)
    throw std::invalid_argument("lsbm_embed: payload outside [0, 1]");

  std::vector<std::pair<int, int>> sites; // (block, index) of nonzero ACs
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int i = 1; i < blocks[b].shape.size(); ++i)
      if (blocks[b].coeffs[i] != 0)
        sites.emplace_back(static_cast<int>(b), i);

  double rate = change_rate_for_payload(params.payload);
  std::int64_t wanted =
      std::llround(rate * static_cast<double>(sites.size()));
  wanted = std::min<std::int64_t>(wanted, static_cast<std::int64_t>(sites.size()));

  std::vector<DctBlock> out = blocks;
  ChangeSet set;
  for (std::int64_t t = 0; t < wanted; ++t) {
    std::int64_t pick =
        t + static_cast<std::int64_t>(
                rng.below(static_cast<std::uint64_t>(sites.size() - t)));
    std::swap(sites[t], sites[pick]);
    auto [b, i] = sites[t];
    int delta = rng.coin() ? 1 : -1;
    // A +-1 that lands on zero would delete the carrier; take the other
    // direction so the nonzero-AC count is preserved.
    if (out[b].coeffs[i] + delta == 0)
      delta = -delta;
    out[b].coeffs[i] += delta;
    set.changes.push_back({b, i, delta});
  }
  return {std::move(out), std::move(set)};
}

} // namespace jcompat
