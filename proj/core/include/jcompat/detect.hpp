#pragma once

#include "jcompat/feasibility.hpp"

#include <memory>
#include <span>
#include <vector>

namespace jcompat {

enum class BlockOutcome {
  Feasible,     // verified antecedent exists
  Incompatible, // provably no antecedent: certain evidence of modification
  Unsolved,     // budget ran out undecided
  Ignored,      // budget ran out after unverifiable candidates
  Skipped,      // decompression clips outside [0, 255]; not analyzed
};

struct BlockReport {
  int index = 0;
  BlockOutcome outcome = BlockOutcome::Skipped;
  bool clipped = false;
  std::uint64_t nodes = 0;
  double elapsed_seconds = 0.0;
  std::optional<Verdict> verdict; // absent for skipped blocks
};

// Decides one block: clipped blocks are skipped without solving, everything
// else goes through solve_feasibility under the given budget.
BlockReport classify_block(const DctBlock &c, const Budget &budget,
                           const std::shared_ptr<const DctMatrix> &m,
                           double eps = kDefaultEps);

struct ImageScore {
  int n_blocks = 0;
  int n_feasible = 0;
  int n_incompatible = 0;
  int n_unsolved = 0;
  int n_ignored = 0;
  int n_skipped = 0;
  // Unsolved fraction among blocks that were actually decided-or-timed-out:
  // skipped and ignored blocks do not count toward the denominator.
  double unsolved_ratio = 0.0;
  // A single incompatible block is proof of modification.
  bool stego_proven = false;
};

ImageScore score_image(std::span<const BlockReport> reports);

// Scalar detector score for threshold sweeps: the unsolved ratio, except
// that proven images score above every possible ratio.
double detector_score(const ImageScore &s);

struct SweepPoint {
  double tau = 0.0;
  double p_fa = 0.0;
  double p_md = 0.0;
  double pe = 0.0;
};

struct PeResult {
  double pe = 0.0; // min over tau of (P_FA + P_MD) / 2
  double tau = 0.0;
  double p_fa = 0.0;
  double p_md = 0.0;
  std::vector<SweepPoint> sweep; // every candidate threshold, ascending
};

// Minimum average error of the rule "score > tau means stego" over all
// thresholds. Candidates are every distinct score plus a sentinel below the
// minimum; ties go to smaller P_FA, then smaller tau.
PeResult pe_min(std::span<const double> cover_scores,
                std::span<const double> stego_scores);

// Chance that r independently modified blocks all escape a detector that
// catches each with probability p_single: (1 - p_single)^r.
double expected_miss(double p_single, int r);

struct CurvePoint {
  Budget budget;
  std::vector<double> cover_scores;
  std::vector<double> stego_scores;
  PeResult pe;
};

struct DetectorCurve {
  std::vector<CurvePoint> points;
};

// Classifies every block of every image at each budget and sweeps the
// per-image scores into one P_E point per budget. Budgets must ascend and be
// all node budgets or all time budgets. For node budgets each block is
// solved once at the largest budget and the verdicts at smaller budgets are
// derived from the node counters, which is exact because the search visits
// nodes in the same order under every budget.
DetectorCurve timing_curve(const std::vector<std::vector<DctBlock>> &cover,
                           const std::vector<std::vector<DctBlock>> &stego,
                           std::span<const Budget> budgets,
                           const std::shared_ptr<const DctMatrix> &m,
                           double eps = kDefaultEps);

} // namespace jcompat
