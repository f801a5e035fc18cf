#pragma once

#include "jcompat/codec.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace jcompat {

// Default width of the open shell excluded around strict inequalities during
// the first search pass.
inline constexpr double kDefaultEps = 1e-9;

// Default ceiling on the number of candidates brute_force_antecedent will
// enumerate before refusing.
inline constexpr std::uint64_t kDefaultEnumCap = 100'000'000;

// Integer unknowns of the antecedent problem. A candidate pixel block is
// recovered as x~ = rounded(y) - k, coordinate by coordinate.
struct KVector {
  std::vector<int> k;

  friend bool operator==(const KVector &, const KVector &) = default;
};

// Linear system whose integer solutions k are exactly the candidates the
// rounding analysis cannot exclude: row r of A k <= b is the inequality
//   (M k)_f <= (M e)_f + q_f / 2        for r = f      (rows 0 .. nm-1)
//  -(M k)_f <= -(M e)_f + q_f / 2       for r = nm + f (rows nm .. 2nm-1).
// Exactly one row of each pair is strict; which one depends on the sign of
// coefficient f (nonnegative coefficients make the lower row strict). During
// the eps pass a strict row is shrunk to A k <= b - eps; the closed pass and
// all candidate verification use b itself.
class ConstraintSystem {
public:
  ConstraintSystem(DctBlock block, std::shared_ptr<const DctMatrix> matrix,
                   std::vector<double> e, std::vector<int> rounded,
                   double eps);

  int vars() const { return block_.shape.size(); }
  int rows() const { return 2 * vars(); }

  double a(int row, int col) const {
    int nm = vars();
    return row < nm ? matrix_->at(row, col) : -matrix_->at(row - nm, col);
  }
  double b(int row) const { return b_[row]; }
  bool strict(int row) const { return strict_[row] != 0; }
  double eps() const { return eps_; }

  const DctBlock &block() const { return block_; }
  const DctMatrix &matrix() const { return *matrix_; }
  const std::shared_ptr<const DctMatrix> &matrix_ptr() const { return matrix_; }
  std::span<const double> e() const { return e_; }
  std::span<const int> rounded() const { return rounded_; }

  // Same feasible region with every row treated as closed and eps = 0.
  ConstraintSystem closed() const;

  // A k <= b, honoring strictness (eps pass semantics when `use_eps`).
  bool satisfies(const KVector &k, bool use_eps) const;

private:
  DctBlock block_;
  std::shared_ptr<const DctMatrix> matrix_;
  std::vector<double> e_;
  std::vector<int> rounded_;
  std::vector<double> b_;
  std::vector<std::uint8_t> strict_;
  double eps_;
};

// Builds the system for coefficients c whose decompression has rounding
// error e. The rounded decompression is recomputed internally from c, so e
// must be the error of this very block. eps must be positive.
ConstraintSystem build_constraints(const DctBlock &c, std::span<const double> e,
                                   double eps,
                                   std::shared_ptr<const DctMatrix> matrix);

// Convenience: decompresses c itself to obtain e.
ConstraintSystem build_constraints(const DctBlock &c, double eps,
                                   std::shared_ptr<const DctMatrix> matrix);

enum class VerdictKind {
  Feasible,   // verified antecedent found
  Infeasible, // search space exhausted, provably no antecedent
  Exhausted,  // budget spent before a conclusion
  Ignored,    // budget spent after meeting candidates that failed verification
};

struct Verdict {
  VerdictKind kind = VerdictKind::Exhausted;
  std::optional<KVector> k; // set iff kind == Feasible
  std::uint64_t nodes = 0;
  double elapsed_seconds = 0.0;
  // Candidates that satisfied the system but failed recompression.
  std::uint64_t rejected_candidates = 0;
  // Node count at which the first rejected candidate appeared, if any.
  std::optional<std::uint64_t> first_rejection_node;
  // True when the closed second pass actually ran.
  bool closed_recheck = false;
  std::string reason; // budget kind for Exhausted/Ignored

  bool feasible() const { return kind == VerdictKind::Feasible; }
  bool infeasible() const { return kind == VerdictKind::Infeasible; }
  bool decided() const { return feasible() || infeasible(); }
};

// Search limits. Node budgets are deterministic; wall-clock budgets are not.
// Both may be set; both unset means run to completion.
struct Budget {
  std::optional<std::uint64_t> max_nodes;
  std::optional<double> max_seconds;

  static Budget unlimited() { return {}; }
  static Budget nodes(std::uint64_t n) { return {n, std::nullopt}; }
  static Budget seconds(double s) { return {std::nullopt, s}; }
  bool is_unlimited() const { return !max_nodes && !max_seconds; }
};

// Per-coordinate inclusive bounds [lo_i, hi_i] outside which no solution of
// the system can lie: |(M(k - e))_i| <= q_i / 2 row-wise implies
// |k_i - e_i| <= s_i with s_i = sum_f |M_fi| q_f / 2.
std::vector<std::pair<int, int>> k_bounds(const ConstraintSystem &sys);

enum class AntecedentCheck {
  Verified,   // compress(rounded - k) reproduces the coefficients
  Mismatch,   // pixel block valid but compresses differently
  OutOfRange, // rounded - k leaves [0, 255]; not a pixel block at all
};

// Ground-truth check of one candidate by actual recompression.
AntecedentCheck verify_antecedent(const KVector &k, const DctBlock &c,
                                  const DctMatrix &m);

// Exhaustive reference search over the k_bounds box in lexicographic order.
// Verifies every candidate by recompression; returns the first verified k or
// Infeasible. Throws EnumerationCapError when the box exceeds `cap`.
Verdict brute_force_antecedent(const DctBlock &c, const DctMatrix &m,
                               std::uint64_t cap = kDefaultEnumCap);

// All verified antecedent offsets in lexicographic order (small blocks only;
// same cap rule as brute_force_antecedent).
std::vector<KVector> enumerate_antecedents(const DctBlock &c,
                                           const DctMatrix &m,
                                           std::uint64_t cap = kDefaultEnumCap);

class EnumerationCapError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Branch-and-bound decision procedure.
//
// A greedy rounding decoder settles most unmodified blocks without any
// search. The main stage then splits the transform into its two separable
// 1D factors, enumerates the complete candidate list of every spatial row
// over closed bounds, and joins the rows under the per-frequency windows;
// every complete assignment is verified by recompression, so Feasible
// verdicts are never wrong and exhausting the candidate space proves
// Infeasible outright. Blocks whose rows exceed the candidate cap (wide
// quantization steps) fall back to a two-pass interval tree over the full
// system: pass 1 searches the eps-shrunk region, and a closed second pass
// re-runs with eps = 0 before Infeasible may be reported, unless no pass-1
// decision was within eps of a strict bound. A spent budget yields
// Exhausted, or Ignored when some candidate had already failed
// verification. Node counts are cumulative across stages and search order
// is deterministic, so equal budgets give equal verdicts.
Verdict solve_feasibility(const ConstraintSystem &sys, const Budget &budget);

} // namespace jcompat
