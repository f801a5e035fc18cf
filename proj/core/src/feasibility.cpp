#include "jcompat/feasibility.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

namespace jcompat {

namespace {

// Absolute slack on row comparisons. Row sums over a block accumulate float
// error well below this, and it stays two decades under kDefaultEps so the
// eps shell is never swallowed by the slack.
constexpr double kGuard = 1e-10;
// Slack applied inside floor/ceil after divisions, so an exactly attained
// integer bound is never lost to the last ulp of the quotient.
constexpr double kDivSlack = 1e-9;
// Outward nudge for the box bounds derived from column norms.
constexpr double kBoundsSlack = 1e-12;
// Propagation sweeps per search node; the loop exits early once a sweep
// changes nothing, so this only caps pathological ping-pong.
constexpr int kMaxSweeps = 32;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int floor_clamped(double x) {
  double f = std::floor(x);
  if (f >= 1e9)
    return std::numeric_limits<int>::max() / 2;
  if (f <= -1e9)
    return std::numeric_limits<int>::min() / 2;
  return static_cast<int>(f);
}

int ceil_clamped(double x) {
  double c = std::ceil(x);
  if (c >= 1e9)
    return std::numeric_limits<int>::max() / 2;
  if (c <= -1e9)
    return std::numeric_limits<int>::min() / 2;
  return static_cast<int>(c);
}

// Squared distance from e to the nearest integer in [lo, hi].
double min_sq_dist(double e, int lo, int hi) {
  if (e <= lo) {
    double d = lo - e;
    return d * d;
  }
  if (e >= hi) {
    double d = e - hi;
    return d * d;
  }
  double fl = std::floor(e);
  double d = std::min(e - fl, fl + 1.0 - e);
  return d * d;
}

// Ground-truth candidate check by direct recompression. Allocation-free and
// early-exits on the first mismatching coefficient, which is where almost
// every losing candidate dies.
class RawVerifier {
public:
  RawVerifier(const DctBlock &c, const DctMatrix &m,
              std::span<const int> rounded)
      : c_(&c), m_(&m), rounded_(rounded), shifted_(c.shape.size()) {}

  bool check(const int *k) {
    int nm = static_cast<int>(shifted_.size());
    for (int p = 0; p < nm; ++p) {
      int x = rounded_[p] - k[p];
      if (x < 0 || x > 255)
        return false;
      shifted_[p] = x - kLevelShift;
    }
    for (int f = 0; f < nm; ++f) {
      const double *row = m_->row(f).data();
      double acc = 0.0;
      for (int p = 0; p < nm; ++p)
        acc += row[p] * shifted_[p];
      if (std::llround(acc / c_->quant.at(f)) != c_->coeffs[f])
        return false;
    }
    return true;
  }

private:
  const DctBlock *c_;
  const DctMatrix *m_;
  std::span<const int> rounded_;
  std::vector<double> shifted_;
};

// Per-coordinate box |k_i - e_i| <= s_i with s_i from column norms.
void box_from_columns(const DctMatrix &m, const QuantTable &q,
                      std::span<const double> e, std::vector<int> &lo,
                      std::vector<int> &hi) {
  int nm = m.size();
  lo.resize(nm);
  hi.resize(nm);
  for (int i = 0; i < nm; ++i) {
    double s = 0.0;
    for (int f = 0; f < nm; ++f)
      s += std::fabs(m.at(f, i)) * q.at(f);
    s *= 0.5;
    lo[i] = ceil_clamped(e[i] - s - kBoundsSlack);
    hi[i] = floor_clamped(e[i] + s + kBoundsSlack);
  }
}

// Support radii of the constraint region along pairwise directions: any
// feasible k has |(k_i + k_j) - (e_i + e_j)| <= sum[i][j] and likewise for
// differences, because k - e is the transpose transform of a vector bounded
// per-row by half a quantizer step. These depend only on shape and quantizer,
// so one table serves every block of an experiment.
struct PairRadii {
  int n = 0;
  std::vector<double> sum;
  std::vector<double> diff;
};

const PairRadii &pair_radii(const DctMatrix &m, const QuantTable &q) {
  static thread_local BlockShape shape{1, 1};
  static thread_local std::vector<int> steps;
  static thread_local PairRadii radii;
  auto qs = q.steps();
  if (radii.n == m.size() && shape == m.shape() &&
      std::equal(steps.begin(), steps.end(), qs.begin(), qs.end()))
    return radii;
  int n = m.size();
  radii.n = n;
  radii.sum.assign(static_cast<std::size_t>(n) * n, 0.0);
  radii.diff.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0, d = 0.0;
      for (int f = 0; f < n; ++f) {
        double mi = m.at(f, i), mj = m.at(f, j);
        s += std::fabs(mi + mj) * q.at(f);
        d += std::fabs(mi - mj) * q.at(f);
      }
      std::size_t ij = static_cast<std::size_t>(i) * n + j;
      std::size_t ji = static_cast<std::size_t>(j) * n + i;
      radii.sum[ij] = radii.sum[ji] = 0.5 * s;
      radii.diff[ij] = radii.diff[ji] = 0.5 * d;
    }
  }
  shape = m.shape();
  steps.assign(qs.begin(), qs.end());
  return radii;
}

// Branching order of the variables: repeatedly take the column of M with the
// largest residual after projecting out the columns already taken (pivoted
// Gram-Schmidt). Early assignments then span row space as fast as possible,
// which surfaces conflicts high in the tree instead of deep inside it.
// Depends only on the shape, so one table serves every block.
const std::vector<int> &branch_order(const DctMatrix &m) {
  static thread_local BlockShape shape{1, 1};
  static thread_local std::vector<int> order;
  if (!order.empty() && shape == m.shape())
    return order;
  int n = m.size();
  std::vector<double> cols(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int f = 0; f < n; ++f)
      cols[static_cast<std::size_t>(j) * n + f] = m.at(f, j);
  std::vector<double> res(n, 1.0); // residual squared norms, columns are unit
  std::vector<std::uint8_t> taken(n, 0);
  order.assign(n, 0);
  for (int t = 0; t < n; ++t) {
    int best = -1;
    double best_r = -1.0;
    for (int j = 0; j < n; ++j) {
      if (!taken[j] && res[j] > best_r + 1e-12) {
        best_r = res[j];
        best = j;
      }
    }
    order[t] = best;
    taken[best] = 1;
    double *bj = cols.data() + static_cast<std::size_t>(best) * n;
    double bn = std::sqrt(std::max(res[best], 1e-30));
    for (int f = 0; f < n; ++f)
      bj[f] /= bn;
    for (int j = 0; j < n; ++j) {
      if (taken[j])
        continue;
      double *cj = cols.data() + static_cast<std::size_t>(j) * n;
      double dot = 0.0;
      for (int f = 0; f < n; ++f)
        dot += bj[f] * cj[f];
      for (int f = 0; f < n; ++f)
        cj[f] -= dot * bj[f];
      res[j] -= dot * dot;
    }
  }
  shape = m.shape();
  return order;
}

// Everything about one solve that both search passes share.
struct Problem {
  const ConstraintSystem *sys = nullptr;
  int n = 0;
  std::vector<double> col;    // col[j * n + f] = M(f, j)
  std::vector<double> row_lo; // closed bounds on (M k)_f
  std::vector<double> row_hi;
  std::vector<std::uint8_t> lo_strict;
  std::vector<std::uint8_t> hi_strict;
  std::vector<double> e;
  std::vector<int> rounded;
  std::vector<int> dom_lo; // root domains, box intersected with pixel range
  std::vector<int> dom_hi;
  const PairRadii *pairs = nullptr;
  const std::vector<int> *branch = nullptr; // static variable order
  double r2 = 0.0; // squared radius of the ball around e
  bool empty = false;
};

Problem make_problem(const ConstraintSystem &sys) {
  Problem p;
  p.sys = &sys;
  p.n = sys.vars();
  const DctMatrix &m = sys.matrix();
  const QuantTable &q = sys.block().quant;
  auto e = sys.e();
  auto rounded = sys.rounded();
  p.e.assign(e.begin(), e.end());
  p.rounded.assign(rounded.begin(), rounded.end());

  p.col.resize(static_cast<std::size_t>(p.n) * p.n);
  for (int j = 0; j < p.n; ++j)
    for (int f = 0; f < p.n; ++f)
      p.col[static_cast<std::size_t>(j) * p.n + f] = m.at(f, j);

  p.row_lo.resize(p.n);
  p.row_hi.resize(p.n);
  p.lo_strict.resize(p.n);
  p.hi_strict.resize(p.n);
  for (int f = 0; f < p.n; ++f) {
    double me = 0.0;
    for (int i = 0; i < p.n; ++i)
      me += m.at(f, i) * p.e[i];
    double half = 0.5 * q.at(f);
    p.row_lo[f] = me - half;
    p.row_hi[f] = me + half;
    p.hi_strict[f] = sys.block().coeffs[f] < 0;
    p.lo_strict[f] = !p.hi_strict[f];
    p.r2 += half * half;
  }

  p.pairs = &pair_radii(m, q);
  p.branch = &branch_order(m);
  box_from_columns(m, q, p.e, p.dom_lo, p.dom_hi);
  for (int i = 0; i < p.n; ++i) {
    // Any antecedent pixel must land in [0, 255], so k_i = rounded_i - x_i
    // is confined to [rounded_i - 255, rounded_i].
    p.dom_lo[i] = std::max(p.dom_lo[i], p.rounded[i] - 255);
    p.dom_hi[i] = std::min(p.dom_hi[i], p.rounded[i]);
    if (p.dom_lo[i] > p.dom_hi[i])
      p.empty = true;
  }
  return p;
}

struct DecodeOutcome {
  bool verified = false;
  bool rejected = false;
  std::vector<int> k;
};

// Greedy rounding decoder, run once before the tree search. Starting from the
// nearest integer point to e, it walks single-coordinate steps that best
// reduce the total squared row violation and hands any violation-free point
// to the recompression check. Most feasible blocks end here; infeasible ones
// stall after a few steps and fall through to the search.
DecodeOutcome greedy_decode(const Problem &p, RawVerifier &verifier) {
  int n = p.n;
  DecodeOutcome out;
  std::vector<int> k(n);
  for (int i = 0; i < n; ++i)
    k[i] = std::clamp(round_half_away(p.e[i]), p.dom_lo[i], p.dom_hi[i]);

  std::vector<double> g(n, 0.0);
  auto recompute = [&] {
    std::fill(g.begin(), g.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      const double *col = p.col.data() + static_cast<std::size_t>(j) * n;
      for (int f = 0; f < n; ++f)
        g[f] += col[f] * k[j];
    }
  };
  auto excess = [&](double gf, int f) {
    double over = gf - (p.row_hi[f] + kGuard);
    double under = (p.row_lo[f] - kGuard) - gf;
    return std::max({over, under, 0.0});
  };
  auto violation = [&] {
    double v = 0.0;
    for (int f = 0; f < n; ++f) {
      double x = excess(g[f], f);
      v += x * x;
    }
    return v;
  };

  recompute();
  double v = violation();
  int max_steps = 8 * n;
  for (int step = 0; step < max_steps; ++step) {
    if (v == 0.0) {
      // Incremental updates could in principle drift a hair, so re-derive the
      // row values before trusting a zero.
      recompute();
      v = violation();
      if (v == 0.0) {
        if (verifier.check(k.data())) {
          out.verified = true;
          out.k = std::move(k);
        } else {
          out.rejected = true;
        }
        return out;
      }
    }
    int best_j = -1, best_d = 0;
    double best_v = v - 1e-15;
    for (int j = 0; j < n; ++j) {
      const double *col = p.col.data() + static_cast<std::size_t>(j) * n;
      for (int d : {1, -1}) {
        int nv = k[j] + d;
        if (nv < p.dom_lo[j] || nv > p.dom_hi[j])
          continue;
        double cand = 0.0;
        for (int f = 0; f < n; ++f) {
          double x = excess(g[f] + d * col[f], f);
          cand += x * x;
        }
        if (cand < best_v) {
          best_v = cand;
          best_j = j;
          best_d = d;
        }
      }
    }
    if (best_j < 0)
      return out;
    const double *col = p.col.data() + static_cast<std::size_t>(best_j) * n;
    for (int f = 0; f < n; ++f)
      g[f] += best_d * col[f];
    k[best_j] += best_d;
    v = violation();
  }
  return out;
}

// Mutable search context shared by the two passes of one solve: cumulative
// node and rejection counters plus the budget.
struct SolveCtx {
  const Budget *budget = nullptr;
  Clock::time_point t0;
  std::uint64_t nodes = 0;
  std::uint64_t rejected = 0;
  std::optional<std::uint64_t> first_rejection;
  bool sensitive = false; // some pass-1 decision was within eps of a bound
  KVector found;
  std::string budget_reason;
  int time_countdown = 0;

  bool budget_hit() {
    if (budget->max_nodes && nodes >= *budget->max_nodes) {
      budget_reason = "node-budget";
      return true;
    }
    if (budget->max_seconds && --time_countdown <= 0) {
      time_countdown = 256;
      if (seconds_since(t0) >= *budget->max_seconds) {
        budget_reason = "time-budget";
        return true;
      }
    }
    return false;
  }
};

// Depth-first search with interval propagation. One instance per pass; all
// incremental state is restored from per-depth snapshots on backtrack, so a
// revisit sees bit-identical numbers and the traversal is deterministic.
class Pass {
public:
  enum class Result { Found, Done, Budget };

  Pass(const Problem &p, bool use_eps, SolveCtx &ctx)
      : p_(p), ctx_(ctx), n_(p.n), use_eps_(use_eps),
        verifier_(p.sys->block(), p.sys->matrix(), p.rounded) {
    eff_lo_.resize(n_);
    eff_hi_.resize(n_);
    half_.resize(n_);
    double eps = p_.sys->eps();
    for (int f = 0; f < n_; ++f) {
      eff_lo_[f] = p_.row_lo[f] + ((use_eps_ && p_.lo_strict[f]) ? eps : 0.0);
      eff_hi_[f] = p_.row_hi[f] - ((use_eps_ && p_.hi_strict[f]) ? eps : 0.0);
      half_[f] = 0.5 * (p_.row_hi[f] - p_.row_lo[f]);
    }

    lo_ = p_.dom_lo;
    hi_ = p_.dom_hi;
    fixed_.assign(n_, 0);
    fsum_.assign(n_, 0.0);
    cmin_.assign(n_, 0.0);
    cmax_.assign(n_, 0.0);
    msq_.assign(n_, 0.0);
    for (int f = 0; f < n_; ++f) {
      double mn = 0.0, mx = 0.0;
      for (int j = 0; j < n_; ++j) {
        double a = p_.col[static_cast<std::size_t>(j) * n_ + f];
        double alo = a * lo_[j], ahi = a * hi_[j];
        mn += std::min(alo, ahi);
        mx += std::max(alo, ahi);
      }
      cmin_[f] = mn;
      cmax_[f] = mx;
    }
    rsq_ = 0.0;
    for (int j = 0; j < n_; ++j) {
      msq_[j] = min_sq_dist(p_.e[j], lo_[j], hi_[j]);
      rsq_ += msq_[j];
    }
    fsq_ = 0.0;
    unfixed_ = n_;
    kbuf_.resize(n_);
    base_.resize(n_);
    gx_.resize(n_);
    gd_.resize(n_);
    for (int f = 0; f < n_; ++f) {
      double me = p_.row_lo[f] + half_[f];
      gx_[f] = std::clamp(-me, -half_[f], half_[f]);
    }
    astack_.reserve(n_);
    lpT_.resize(static_cast<std::size_t>(n_) * 3 * n_);
    lpxb_.resize(n_);
    lpy_.resize(n_);
    lpsg_.resize(n_);
    zlo_.resize(n_);
    zhi_.resize(n_);
    zval_.resize(n_);
    wlo_.resize(n_);
    whi_.resize(n_);
    wval_.resize(n_);
    lpcol_.resize(n_);
    lpbasis_.resize(n_);
    uidx_.resize(n_);
    zstat_.resize(n_);
    wstat_.resize(n_);

    int depths = n_ + 1;
    s_lo_.resize(static_cast<std::size_t>(depths) * n_);
    s_hi_.resize(static_cast<std::size_t>(depths) * n_);
    s_fixed_.resize(static_cast<std::size_t>(depths) * n_);
    s_fsum_.resize(static_cast<std::size_t>(depths) * n_);
    s_cmin_.resize(static_cast<std::size_t>(depths) * n_);
    s_cmax_.resize(static_cast<std::size_t>(depths) * n_);
    s_msq_.resize(static_cast<std::size_t>(depths) * n_);
    s_gx_.resize(static_cast<std::size_t>(depths) * n_);
    s_fsq_.resize(depths);
    s_rsq_.resize(depths);
    s_unfixed_.resize(depths);
  }

  Result run() {
    if (!propagate())
      return Result::Done;
    return dfs(0);
  }

private:
  Result dfs(int depth) {
    if (unfixed_ == 0) {
      for (int i = 0; i < n_; ++i)
        kbuf_[i] = lo_[i];
      if (verifier_.check(kbuf_.data())) {
        ctx_.found.k = kbuf_;
        return Result::Found;
      }
      ++ctx_.rejected;
      if (!ctx_.first_rejection)
        ctx_.first_rejection = ctx_.nodes;
      return Result::Done;
    }
    int j = pick_var();
    int lo0 = lo_[j], hi0 = hi_[j];
    // Try values nearest the slice iterate first: the iterate approximates a
    // continuous point of the current slice, so its coordinate for j is a
    // better center than e_j once assignments have shifted the region.
    double zj;
    {
      const double *col = p_.col.data() + static_cast<std::size_t>(j) * n_;
      double acc = 0.0;
      for (int f = 0; f < n_; ++f)
        acc += col[f] * (gx_[f] - fsum_[f] + p_.row_lo[f] + half_[f]);
      zj = p_.e[j] + acc;
    }
    int c0 = std::clamp(round_half_away(zj), lo0, hi0);
    int below = c0, above = c0;
    for (int produced = 0; produced <= hi0 - lo0; ++produced) {
      int v = c0;
      if (produced > 0) {
        bool take_above;
        if (below - 1 < lo0)
          take_above = true;
        else if (above + 1 > hi0)
          take_above = false;
        else
          take_above = ((above + 1) - zj) <= (zj - (below - 1));
        v = take_above ? ++above : --below;
      }
      if (ctx_.budget_hit())
        return Result::Budget;
      ++ctx_.nodes;
      save(depth);
      assign(j, v);
      astack_.push_back(j);
      if (propagate() && !slice_gap_prunes()) {
        Result r = dfs(depth + 1);
        if (r != Result::Done)
          return r;
      }
      restore(depth);
      astack_.resize(depth);
    }
    return Result::Done;
  }

  // Emptiness test for the linear relaxation of the node: is there a real
  // point of the current domain box whose free-column combination lands the
  // row values inside the row box, given everything already fixed? Solved as
  // a phase-1 bounded simplex. A proven infeasibility hands back dual row
  // multipliers that go through an exact interval separation test before the
  // prune is believed, so pruning never trusts the pivoting; a feasible
  // point replaces the slice iterate and sharpens the value ordering below
  // this node.
  bool slice_gap_prunes() {
    if (unfixed_ == 0)
      return false;
    for (int f = 0; f < n_; ++f)
      base_[f] = fsum_[f] - (p_.row_lo[f] + half_[f]);
    return lp_slice() > 0;
  }

  // Phase-1 bounded simplex on the linear relaxation of the node. The
  // structural variables are the unfixed coefficients themselves, confined
  // to their propagated domains, plus one bounded slack per row carrying the
  // row value; artificials absorb whatever the warm start leaves violated.
  // Returns 1 to prune, -1 when the relaxation has a point, 0 when the
  // pivot cap ran out undecided.
  int lp_slice() {
    int u = 0;
    for (int j = 0; j < n_; ++j) {
      if (fixed_[j])
        continue;
      uidx_[u] = j;
      lpcol_[u] = p_.col.data() + static_cast<std::size_t>(j) * n_;
      zlo_[u] = lo_[j];
      zhi_[u] = hi_[j];
      ++u;
    }
    int wbase = u, abase = u + n_, cols = u + 2 * n_;
    int stride = 3 * n_;
    double *T = lpT_.data();

    // Warm start: each coefficient at the domain bound nearest its
    // continuous value under the slice iterate; the row slack basic at the
    // clamped row value where that already satisfies the row, an artificial
    // basic on the residual where it does not.
    for (int i = 0; i < u; ++i) {
      const double *col = lpcol_[i];
      double zt = p_.e[uidx_[i]];
      for (int f = 0; f < n_; ++f)
        zt += col[f] * (gx_[f] - base_[f]);
      bool up = zhi_[i] - zt <= zt - zlo_[i];
      zstat_[i] = up ? 1 : 0;
      zval_[i] = up ? zhi_[i] : zlo_[i];
    }
    double obj = 0.0;
    for (int f = 0; f < n_; ++f) {
      wlo_[f] = -half_[f] - base_[f];
      whi_[f] = half_[f] - base_[f];
      double rv = 0.0;
      for (int i = 0; i < u; ++i)
        rv += lpcol_[i][f] * zval_[i];
      double wv = std::clamp(rv, wlo_[f], whi_[f]);
      double res = rv - wv;
      // The artificial column must cancel the start residual of its row, so
      // it carries the opposite sign.
      double sg = res >= 0.0 ? -1.0 : 1.0;
      double rs; // diagonal entry of the inverse starting basis for this row
      if (std::fabs(res) < 1e-12) {
        lpbasis_[f] = wbase + f;
        wstat_[f] = 2;
        lpxb_[f] = rv;
        rs = -1.0;
      } else {
        lpbasis_[f] = abase + f;
        wstat_[f] = wv == wlo_[f] ? 0 : 1;
        wval_[f] = wv;
        lpxb_[f] = std::fabs(res);
        obj += lpxb_[f];
        rs = sg;
      }
      lpsg_[f] = sg;
      double *row = T + static_cast<std::size_t>(f) * stride;
      for (int i = 0; i < u; ++i)
        row[i] = rs * lpcol_[i][f];
      for (int s = 0; s < n_; ++s)
        row[wbase + s] = 0.0;
      row[wbase + f] = -rs;
      for (int s = 0; s < n_; ++s)
        row[abase + s] = 0.0;
      row[abase + f] = rs * sg;
    }

    bool bland = false;
    int stalls = 0;
    for (int iter = 0; iter < 400; ++iter) {
      if (obj < 1e-9) {
        // Feasible: rebuild the slice iterate from the solution, storing it
        // as an offset from the rounding target so value ordering below this
        // node recovers the relaxation point coordinate by coordinate.
        for (int i = 0; i < u; ++i)
          gd_[i] = zval_[i];
        for (int r = 0; r < n_; ++r)
          if (lpbasis_[r] < u)
            gd_[lpbasis_[r]] = lpxb_[r];
        for (int f = 0; f < n_; ++f) {
          double acc = base_[f];
          for (int i = 0; i < u; ++i)
            acc += lpcol_[i][f] * (gd_[i] - p_.e[uidx_[i]]);
          gx_[f] = acc;
        }
        return -1;
      }
      // Row multipliers for the artificial cost vector, recovered from the
      // artificial block of the tableau which carries the basis inverse.
      for (int s = 0; s < n_; ++s) {
        double acc = 0.0;
        for (int r = 0; r < n_; ++r)
          if (lpbasis_[r] >= abase)
            acc += T[static_cast<std::size_t>(r) * stride + abase + s];
        lpy_[s] = lpsg_[s] * acc;
      }
      // Entering column among offsets and row slacks off their helpful
      // bound. Steepest reduced cost normally, lowest index once progress
      // stalls.
      int ec = -1;
      double best = 1e-9;
      for (int i = 0; i < u; ++i) {
        if (zstat_[i] == 2)
          continue;
        double rc = 0.0;
        const double *col = lpcol_[i];
        for (int f = 0; f < n_; ++f)
          rc -= lpy_[f] * col[f];
        double gain = zstat_[i] == 0 ? -rc : rc;
        if (gain > best) {
          best = gain;
          ec = i;
          if (bland)
            break;
        }
      }
      if (!(bland && ec >= 0)) {
        for (int f = 0; f < n_; ++f) {
          if (wstat_[f] == 2)
            continue;
          double gain = wstat_[f] == 0 ? -lpy_[f] : lpy_[f];
          if (gain > best) {
            best = gain;
            ec = wbase + f;
            if (bland)
              break;
          }
        }
      }
      if (ec < 0)
        break;
      bool zvar = ec < wbase;
      int sub = zvar ? ec : ec - wbase;
      double elo = zvar ? zlo_[sub] : wlo_[sub];
      double ehi = zvar ? zhi_[sub] : whi_[sub];
      std::int8_t &est = zvar ? zstat_[sub] : wstat_[sub];
      double dir = est == 0 ? 1.0 : -1.0;
      // Ratio test: the entering variable moves until it flips to its other
      // bound or a basic variable reaches one of its own.
      double dmax = ehi - elo;
      int rstar = -1;
      double astar = 0.0;
      for (int r = 0; r < n_; ++r) {
        double a = dir * T[static_cast<std::size_t>(r) * stride + ec];
        if (std::fabs(a) < 1e-11)
          continue;
        int b = lpbasis_[r];
        double room;
        if (b >= abase) {
          if (a <= 0.0)
            continue;
          room = lpxb_[r];
        } else if (b >= wbase) {
          room = a > 0.0 ? lpxb_[r] - wlo_[b - wbase]
                         : whi_[b - wbase] - lpxb_[r];
        } else {
          room = a > 0.0 ? lpxb_[r] - zlo_[b] : zhi_[b] - lpxb_[r];
        }
        if (room < 0.0)
          room = 0.0;
        double step = room / std::fabs(a);
        if (step < dmax - 1e-12 ||
            (step < dmax + 1e-12 &&
             (rstar < 0 || (bland ? lpbasis_[r] < lpbasis_[rstar]
                                  : std::fabs(a) > std::fabs(astar))))) {
          dmax = std::min(dmax, step);
          rstar = r;
          astar = a;
        }
      }
      if (dmax < 1e-12)
        ++stalls;
      else
        stalls = 0;
      if (stalls > 40)
        bland = true;
      for (int r = 0; r < n_; ++r)
        lpxb_[r] -= dir * T[static_cast<std::size_t>(r) * stride + ec] * dmax;
      if (rstar < 0) {
        est ^= 1;
        if (zvar)
          zval_[sub] = est ? zhi_[sub] : zlo_[sub];
        else
          wval_[sub] = est ? whi_[sub] : wlo_[sub];
      } else {
        int b = lpbasis_[rstar];
        if (b < wbase) {
          bool hlo = astar > 0.0;
          zstat_[b] = hlo ? 0 : 1;
          zval_[b] = hlo ? zlo_[b] : zhi_[b];
        } else if (b < abase) {
          bool hlo = astar > 0.0;
          wstat_[b - wbase] = hlo ? 0 : 1;
          wval_[b - wbase] = hlo ? wlo_[b - wbase] : whi_[b - wbase];
        }
        double *prow = T + static_cast<std::size_t>(rstar) * stride;
        double inv = 1.0 / prow[ec];
        for (int j = 0; j < cols; ++j)
          prow[j] *= inv;
        for (int r = 0; r < n_; ++r) {
          if (r == rstar)
            continue;
          double *row = T + static_cast<std::size_t>(r) * stride;
          double m = row[ec];
          if (m == 0.0)
            continue;
          for (int j = 0; j < cols; ++j)
            row[j] -= m * prow[j];
        }
        lpxb_[rstar] = (dir > 0.0 ? elo : ehi) + dir * dmax;
        lpbasis_[rstar] = ec;
        est = 2;
      }
      obj = 0.0;
      for (int r = 0; r < n_; ++r)
        if (lpbasis_[r] >= abase)
          obj += lpxb_[r];
    }

    // Positive residual at optimality or at the cap: interval-test the row
    // multipliers as a separating functional between what the free offsets
    // can reach and what the rows accept. The test is exact, so a sloppy y
    // only costs the prune.
    for (int s = 0; s < n_; ++s) {
      double acc = 0.0;
      for (int r = 0; r < n_; ++r)
        if (lpbasis_[r] >= abase)
          acc += T[static_cast<std::size_t>(r) * stride + abase + s];
      lpy_[s] = lpsg_[s] * acc;
    }
    double lmin = 0.0, lmax = 0.0;
    for (int i = 0; i < u; ++i) {
      double cz = 0.0;
      const double *col = lpcol_[i];
      for (int f = 0; f < n_; ++f)
        cz += lpy_[f] * col[f];
      double a = cz * zlo_[i], b = cz * zhi_[i];
      lmin += std::min(a, b);
      lmax += std::max(a, b);
    }
    double rmin = 0.0, rmax = 0.0;
    for (int f = 0; f < n_; ++f) {
      double a = lpy_[f] * wlo_[f], b = lpy_[f] * whi_[f];
      rmin += std::min(a, b);
      rmax += std::max(a, b);
    }
    return (lmax < rmin - kGuard || lmin > rmax + kGuard) ? 1 : 0;
  }

  int pick_var() const {
    for (int j = 0; j < n_; ++j)
      if (!fixed_[j] && lo_[j] == hi_[j])
        return j;
    for (int j : *p_.branch)
      if (!fixed_[j])
        return j;
    return -1;
  }

  bool propagate() {
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      bool changed = false;
      for (int f = 0; f < n_; ++f) {
        double lo_sum = fsum_[f] + cmin_[f];
        double hi_sum = fsum_[f] + cmax_[f];
        if (lo_sum > eff_hi_[f] + kGuard) {
          if (use_eps_ && p_.hi_strict[f] && lo_sum <= p_.row_hi[f] + kGuard)
            ctx_.sensitive = true;
          return false;
        }
        if (hi_sum < eff_lo_[f] - kGuard) {
          if (use_eps_ && p_.lo_strict[f] && hi_sum >= p_.row_lo[f] - kGuard)
            ctx_.sensitive = true;
          return false;
        }
        if (unfixed_ == 0)
          continue;
        // Domain tightening always uses the closed interval, so both passes
        // shape domains identically and only the prune checks above can
        // distinguish them.
        double ub = p_.row_hi[f] + kGuard;
        double lb = p_.row_lo[f] - kGuard;
        const double *col = p_.col.data();
        for (int j = 0; j < n_; ++j) {
          if (fixed_[j])
            continue;
          double a = col[static_cast<std::size_t>(j) * n_ + f];
          if (std::fabs(a) < 1e-14)
            continue;
          double alo = a * lo_[j], ahi = a * hi_[j];
          double cmn = std::min(alo, ahi), cmx = std::max(alo, ahi);
          double rest_min = fsum_[f] + cmin_[f] - cmn;
          double rest_max = fsum_[f] + cmax_[f] - cmx;
          double hi_rhs = ub - rest_min; // a * k_j <= hi_rhs
          double lo_rhs = lb - rest_max; // a * k_j >= lo_rhs
          int nl = lo_[j], nh = hi_[j];
          if (a > 0) {
            nh = std::min(nh, floor_clamped(hi_rhs / a + kDivSlack));
            nl = std::max(nl, ceil_clamped(lo_rhs / a - kDivSlack));
          } else {
            nl = std::max(nl, ceil_clamped(hi_rhs / a - kDivSlack));
            nh = std::min(nh, floor_clamped(lo_rhs / a + kDivSlack));
          }
          if (nl > nh)
            return false;
          if (nl > lo_[j] || nh < hi_[j]) {
            shrink(j, nl, nh);
            changed = true;
          }
        }
      }
      // Ball cut: orthonormality bounds ||k - e||^2 by the sum of squared
      // half-steps, valid for the closed region and hence for both passes.
      if (fsq_ + rsq_ > p_.r2 + kGuard)
        return false;
      if (unfixed_ > 0) {
        for (int j = 0; j < n_; ++j) {
          if (fixed_[j])
            continue;
          double slack = p_.r2 + kGuard - fsq_ - (rsq_ - msq_[j]);
          if (slack < 0)
            return false;
          double rad = std::sqrt(slack);
          int nl = std::max(lo_[j], ceil_clamped(p_.e[j] - rad - kDivSlack));
          int nh = std::min(hi_[j], floor_clamped(p_.e[j] + rad + kDivSlack));
          if (nl > nh)
            return false;
          if (nl > lo_[j] || nh < hi_[j]) {
            shrink(j, nl, nh);
            changed = true;
          }
        }
      }
      // Pairwise support cuts: two-coordinate sums and differences of any
      // feasible k stay within precomputed radii of the matching sums and
      // differences of e. Like the ball these bound the closed region, so
      // both passes may prune on them without eps bookkeeping.
      if (unfixed_ > 0) {
        const double *sr = p_.pairs->sum.data();
        const double *dr = p_.pairs->diff.data();
        for (int i = 0; i < n_; ++i) {
          if (fixed_[i])
            continue;
          double ei = p_.e[i];
          std::size_t base = static_cast<std::size_t>(i) * n_;
          int nl = lo_[i], nh = hi_[i];
          for (int j = 0; j < n_; ++j) {
            if (j == i)
              continue;
            double es = ei + p_.e[j], ed = ei - p_.e[j];
            double s = sr[base + j], d = dr[base + j];
            nh = std::min(nh, floor_clamped(es + s - lo_[j] + kDivSlack));
            nl = std::max(nl, ceil_clamped(es - s - hi_[j] - kDivSlack));
            nh = std::min(nh, floor_clamped(ed + d + hi_[j] + kDivSlack));
            nl = std::max(nl, ceil_clamped(ed - d + lo_[j] - kDivSlack));
            if (nl > nh)
              return false;
          }
          if (nl > lo_[i] || nh < hi_[i]) {
            shrink(i, nl, nh);
            changed = true;
          }
        }
      }
      if (!changed)
        break;
    }
    return true;
  }

  void shrink(int j, int nl, int nh) {
    const double *col = p_.col.data() + static_cast<std::size_t>(j) * n_;
    for (int f = 0; f < n_; ++f) {
      double a = col[f];
      double old_lo = a * lo_[j], old_hi = a * hi_[j];
      double new_lo = a * nl, new_hi = a * nh;
      cmin_[f] += std::min(new_lo, new_hi) - std::min(old_lo, old_hi);
      cmax_[f] += std::max(new_lo, new_hi) - std::max(old_lo, old_hi);
    }
    lo_[j] = nl;
    hi_[j] = nh;
    rsq_ -= msq_[j];
    msq_[j] = min_sq_dist(p_.e[j], nl, nh);
    rsq_ += msq_[j];
  }

  void assign(int j, int v) {
    const double *col = p_.col.data() + static_cast<std::size_t>(j) * n_;
    for (int f = 0; f < n_; ++f) {
      double a = col[f];
      double alo = a * lo_[j], ahi = a * hi_[j];
      cmin_[f] -= std::min(alo, ahi);
      cmax_[f] -= std::max(alo, ahi);
      fsum_[f] += a * v;
    }
    lo_[j] = hi_[j] = v;
    fixed_[j] = 1;
    --unfixed_;
    rsq_ -= msq_[j];
    msq_[j] = 0.0;
    double dv = v - p_.e[j];
    fsq_ += dv * dv;
  }

  void save(int d) {
    std::size_t off = static_cast<std::size_t>(d) * n_;
    std::memcpy(s_lo_.data() + off, lo_.data(), n_ * sizeof(int));
    std::memcpy(s_hi_.data() + off, hi_.data(), n_ * sizeof(int));
    std::memcpy(s_fixed_.data() + off, fixed_.data(), n_);
    std::memcpy(s_fsum_.data() + off, fsum_.data(), n_ * sizeof(double));
    std::memcpy(s_cmin_.data() + off, cmin_.data(), n_ * sizeof(double));
    std::memcpy(s_cmax_.data() + off, cmax_.data(), n_ * sizeof(double));
    std::memcpy(s_msq_.data() + off, msq_.data(), n_ * sizeof(double));
    std::memcpy(s_gx_.data() + off, gx_.data(), n_ * sizeof(double));
    s_fsq_[d] = fsq_;
    s_rsq_[d] = rsq_;
    s_unfixed_[d] = unfixed_;
  }

  void restore(int d) {
    std::size_t off = static_cast<std::size_t>(d) * n_;
    std::memcpy(lo_.data(), s_lo_.data() + off, n_ * sizeof(int));
    std::memcpy(hi_.data(), s_hi_.data() + off, n_ * sizeof(int));
    std::memcpy(fixed_.data(), s_fixed_.data() + off, n_);
    std::memcpy(fsum_.data(), s_fsum_.data() + off, n_ * sizeof(double));
    std::memcpy(cmin_.data(), s_cmin_.data() + off, n_ * sizeof(double));
    std::memcpy(cmax_.data(), s_cmax_.data() + off, n_ * sizeof(double));
    std::memcpy(msq_.data(), s_msq_.data() + off, n_ * sizeof(double));
    std::memcpy(gx_.data(), s_gx_.data() + off, n_ * sizeof(double));
    fsq_ = s_fsq_[d];
    rsq_ = s_rsq_[d];
    unfixed_ = s_unfixed_[d];
  }

  const Problem &p_;
  SolveCtx &ctx_;
  int n_;
  bool use_eps_;
  std::vector<double> eff_lo_, eff_hi_, half_;
  RawVerifier verifier_;

  std::vector<int> lo_, hi_;
  std::vector<std::uint8_t> fixed_;
  std::vector<double> fsum_, cmin_, cmax_, msq_;
  double fsq_ = 0.0, rsq_ = 0.0;
  int unfixed_ = 0;
  std::vector<int> kbuf_;
  std::vector<int> astack_;             // fixed variables in assignment order
  std::vector<double> base_, gd_; // slice-test scratch
  std::vector<double> gx_; // slice iterate, warm-started down the path
  std::vector<double> lpT_, lpxb_, lpy_, lpsg_; // simplex scratch
  std::vector<double> zlo_, zhi_, zval_, wlo_, whi_, wval_;
  std::vector<const double *> lpcol_;
  std::vector<int> lpbasis_, uidx_;
  std::vector<std::int8_t> zstat_, wstat_;

  std::vector<int> s_lo_, s_hi_;
  std::vector<std::uint8_t> s_fixed_;
  std::vector<double> s_fsum_, s_cmin_, s_cmax_, s_msq_, s_gx_;
  std::vector<double> s_fsq_, s_rsq_;
  std::vector<int> s_unfixed_;
};

// 1D orthonormal DCT-II entry, matching the factors of the 2D matrix.
double dct_entry(int a, int i, int n) {
  constexpr double pi = 3.14159265358979323846;
  double scale = (a == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return scale * std::cos((2 * i + 1) * a * pi / (2.0 * n));
}

// Separable two-stage search. The transform matrix is the Kronecker product
// of two 1D transforms, so the row-transformed residuals W = (K - E) Am^T of
// any antecedent are bounded entrywise, and each spatial row has a small
// standalone set of integer candidate rows that can be enumerated on its
// own. The joint stage then assigns one candidate per row under the full
// per-frequency constraints, tightening intervals on the unassigned rows'
// transform values after every assignment. All bounds are closed with the
// usual guard and every complete assignment is checked against the ground
// truth verifier, so exhausting the candidate space proves infeasibility
// without an eps-shrunk pass. Rows whose candidate count exceeds the cap
// abort the stage so the generic tree can take over.
class SepSolver {
public:
  enum class Result { Found, Done, Budget, Overflow };

  static constexpr int kMaxRowCands = 16384;

  SepSolver(const Problem &p, SolveCtx &ctx)
      : p_(p), ctx_(ctx), nr_(p.sys->block().shape.rows),
        mc_(p.sys->block().shape.cols),
        verifier_(p.sys->block(), p.sys->matrix(), p.rounded) {
    const QuantTable &q = p_.sys->block().quant;
    an_.resize(static_cast<std::size_t>(nr_) * nr_);
    for (int a = 0; a < nr_; ++a)
      for (int i = 0; i < nr_; ++i)
        an_[static_cast<std::size_t>(a) * nr_ + i] = dct_entry(a, i, nr_);
    am_.resize(static_cast<std::size_t>(mc_) * mc_);
    for (int b = 0; b < mc_; ++b)
      for (int j = 0; j < mc_; ++j)
        am_[static_cast<std::size_t>(b) * mc_ + j] = dct_entry(b, j, mc_);
    qh_.resize(static_cast<std::size_t>(nr_) * mc_);
    for (int f = 0; f < nr_ * mc_; ++f)
      qh_[f] = 0.5 * q.at(f);
    rho_.resize(static_cast<std::size_t>(nr_) * mc_);
    rr2_.resize(nr_);
    for (int i = 0; i < nr_; ++i) {
      double r2 = 0.0;
      for (int b = 0; b < mc_; ++b) {
        double acc = 0.0;
        for (int a = 0; a < nr_; ++a)
          acc += std::fabs(an_[static_cast<std::size_t>(a) * nr_ + i]) *
                 qh_[static_cast<std::size_t>(a) * mc_ + b];
        rho_[static_cast<std::size_t>(i) * mc_ + b] = acc;
        r2 += acc * acc;
      }
      // The row transform preserves the norm, so the whole row also lives in
      // the ball of this squared radius around its rounding residuals.
      rr2_[i] = r2 + 1e-9;
    }
    ck_.resize(nr_);
    cw_.resize(nr_);
    ccount_.assign(nr_, 0);
    wmin_.resize(static_cast<std::size_t>(nr_) * mc_);
    wmax_.resize(static_cast<std::size_t>(nr_) * mc_);
    tmin_.resize(static_cast<std::size_t>(mc_) * mc_);
    tmax_.resize(static_cast<std::size_t>(mc_) * mc_);
    sfxlo_.resize(static_cast<std::size_t>(mc_ + 1) * mc_);
    sfxhi_.resize(static_cast<std::size_t>(mc_ + 1) * mc_);
    rpart_.resize(static_cast<std::size_t>(mc_ + 1) * mc_);
    kst_.resize(mc_);
    elo_.resize(mc_);
    ehi_.resize(mc_);
    cl_.resize(nr_);
    ch_.resize(nr_);
    sclo_.resize(nr_);
    schi_.resize(nr_);
    dirty_.assign(mc_, 1);
    acount_.assign(nr_, 0);
    asg_.assign(nr_, 0);
    jflo_.resize(static_cast<std::size_t>(nr_) * mc_);
    jfhi_.resize(static_cast<std::size_t>(nr_) * mc_);
    s_jflo_.resize(static_cast<std::size_t>(nr_ + 1) * nr_ * mc_);
    s_jfhi_.resize(static_cast<std::size_t>(nr_ + 1) * nr_ * mc_);
    kfull_.resize(nr_ * mc_);
  }

  Result run() {
    for (int i = 0; i < nr_; ++i) {
      Result r = enum_row(i);
      if (r != Result::Done)
        return r;
      if (ccount_[i] == 0)
        return Result::Done; // some row has no integer option at all
      if (ccount_[i] > kMaxRowCands)
        return Result::Overflow;
    }
    std::memcpy(jflo_.data(), wmin_.data(), jflo_.size() * sizeof(double));
    std::memcpy(jfhi_.data(), wmax_.data(), jfhi_.size() * sizeof(double));
    int maxc = 0;
    for (int i = 0; i < nr_; ++i)
      maxc = std::max(maxc, ccount_[i]);
    mw_ = (maxc + 63) / 64;
    amask_.assign(static_cast<std::size_t>(nr_) * mw_, 0);
    s_amask_.resize(static_cast<std::size_t>(nr_ + 1) * nr_ * mw_);
    for (int i = 0; i < nr_; ++i) {
      std::uint64_t *mask = amask_.data() + static_cast<std::size_t>(i) * mw_;
      for (int c = 0; c < ccount_[i]; ++c)
        mask[c >> 6] |= std::uint64_t{1} << (c & 63);
    }
    return joint(0);
  }

private:
  // Enumerate every integer row i whose 1D transform stays within the
  // entrywise bounds, walking each entry outward from the rounding target.
  Result enum_row(int i) {
    const double *er = p_.e.data() + static_cast<std::size_t>(i) * mc_;
    const int *dlo = p_.dom_lo.data() + static_cast<std::size_t>(i) * mc_;
    const int *dhi = p_.dom_hi.data() + static_cast<std::size_t>(i) * mc_;
    for (int j = 0; j < mc_; ++j)
      for (int b = 0; b < mc_; ++b) {
        double a = am_[static_cast<std::size_t>(b) * mc_ + j];
        double c1 = a * (dlo[j] - er[j]), c2 = a * (dhi[j] - er[j]);
        tmin_[static_cast<std::size_t>(j) * mc_ + b] = std::min(c1, c2);
        tmax_[static_cast<std::size_t>(j) * mc_ + b] = std::max(c1, c2);
      }
    for (int b = 0; b < mc_; ++b) {
      sfxlo_[static_cast<std::size_t>(mc_) * mc_ + b] = 0.0;
      sfxhi_[static_cast<std::size_t>(mc_) * mc_ + b] = 0.0;
    }
    for (int j = mc_ - 1; j >= 0; --j)
      for (int b = 0; b < mc_; ++b) {
        sfxlo_[static_cast<std::size_t>(j) * mc_ + b] =
            sfxlo_[static_cast<std::size_t>(j + 1) * mc_ + b] +
            tmin_[static_cast<std::size_t>(j) * mc_ + b];
        sfxhi_[static_cast<std::size_t>(j) * mc_ + b] =
            sfxhi_[static_cast<std::size_t>(j + 1) * mc_ + b] +
            tmax_[static_cast<std::size_t>(j) * mc_ + b];
      }
    ck_[i].clear();
    cw_[i].clear();
    ccount_[i] = 0;
    for (int b = 0; b < mc_; ++b)
      rpart_[b] = 0.0;
    Result r = row_dfs(i, 0, 0.0, er, dlo, dhi);
    if (r != Result::Done || ccount_[i] == 0 || ccount_[i] > kMaxRowCands)
      return r;
    // Candidates nearest the rounding target first, so feasible blocks
    // surface quickly in the joint stage.
    int cnt = ccount_[i];
    std::vector<int> idx(cnt);
    for (int c = 0; c < cnt; ++c)
      idx[c] = c;
    std::vector<double> dist(cnt);
    for (int c = 0; c < cnt; ++c) {
      double acc = 0.0;
      const int *kr = ck_[i].data() + static_cast<std::size_t>(c) * mc_;
      for (int j = 0; j < mc_; ++j) {
        double d = kr[j] - er[j];
        acc += d * d;
      }
      dist[c] = acc;
    }
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (dist[a] != dist[b])
        return dist[a] < dist[b];
      const int *ka = ck_[i].data() + static_cast<std::size_t>(a) * mc_;
      const int *kb = ck_[i].data() + static_cast<std::size_t>(b) * mc_;
      for (int j = 0; j < mc_; ++j)
        if (ka[j] != kb[j])
          return ka[j] < kb[j];
      return false;
    });
    std::vector<int> sk(ck_[i].size());
    std::vector<double> sw(cw_[i].size());
    for (int c = 0; c < cnt; ++c) {
      std::memcpy(sk.data() + static_cast<std::size_t>(c) * mc_,
                  ck_[i].data() + static_cast<std::size_t>(idx[c]) * mc_,
                  mc_ * sizeof(int));
      std::memcpy(sw.data() + static_cast<std::size_t>(c) * mc_,
                  cw_[i].data() + static_cast<std::size_t>(idx[c]) * mc_,
                  mc_ * sizeof(double));
    }
    ck_[i] = std::move(sk);
    cw_[i] = std::move(sw);
    for (int b = 0; b < mc_; ++b) {
      double mn = cw_[i][b], mx = cw_[i][b];
      for (int c = 1; c < cnt; ++c) {
        double w = cw_[i][static_cast<std::size_t>(c) * mc_ + b];
        mn = std::min(mn, w);
        mx = std::max(mx, w);
      }
      wmin_[static_cast<std::size_t>(i) * mc_ + b] = mn;
      wmax_[static_cast<std::size_t>(i) * mc_ + b] = mx;
    }
    return Result::Done;
  }

  Result row_dfs(int i, int j, double psq, const double *er, const int *dlo,
                 const int *dhi) {
    const double *rho = rho_.data() + static_cast<std::size_t>(i) * mc_;
    double maxdev = std::sqrt(rr2_[i] - psq);
    int vlo = std::max(dlo[j], static_cast<int>(std::ceil(er[j] - maxdev)));
    int vhi = std::min(dhi[j], static_cast<int>(std::floor(er[j] + maxdev)));
    if (vlo > vhi)
      return Result::Done;
    int c0 = std::clamp(round_half_away(er[j]), vlo, vhi);
    int below = c0, above = c0;
    for (int produced = 0; produced <= vhi - vlo; ++produced) {
      int v = c0;
      if (produced > 0) {
        bool take_above;
        if (below - 1 < vlo)
          take_above = true;
        else if (above + 1 > vhi)
          take_above = false;
        else
          take_above = ((above + 1) - er[j]) <= (er[j] - (below - 1));
        v = take_above ? ++above : --below;
      }
      if (ctx_.budget_hit())
        return Result::Budget;
      ++ctx_.nodes;
      double dev = v - er[j];
      double vsq = psq + dev * dev;
      if (vsq > rr2_[i])
        continue;
      const double *cur = rpart_.data() + static_cast<std::size_t>(j) * mc_;
      double *nxt = rpart_.data() + static_cast<std::size_t>(j + 1) * mc_;
      bool ok = true;
      for (int b = 0; b < mc_; ++b) {
        double w = cur[b] +
                   am_[static_cast<std::size_t>(b) * mc_ + j] * (v - er[j]);
        nxt[b] = w;
        double lo = w + sfxlo_[static_cast<std::size_t>(j + 1) * mc_ + b];
        double hi = w + sfxhi_[static_cast<std::size_t>(j + 1) * mc_ + b];
        if (lo > rho[b] + kGuard || hi < -rho[b] - kGuard) {
          ok = false;
          break;
        }
      }
      if (!ok)
        continue;
      kst_[j] = v;
      if (j + 1 == mc_) {
        if (ccount_[i] >= kMaxRowCands) {
          ++ccount_[i]; // trip the overflow check without storing more
          return Result::Done;
        }
        ck_[i].insert(ck_[i].end(), kst_.begin(), kst_.end());
        cw_[i].insert(cw_[i].end(), nxt, nxt + mc_);
        ++ccount_[i];
      } else {
        Result r = row_dfs(i, j + 1, vsq, er, dlo, dhi);
        if (r != Result::Done)
          return r;
        if (ccount_[i] > kMaxRowCands)
          return Result::Done;
      }
    }
    return Result::Done;
  }

  // Interval consistency over the joint constraints: every frequency row
  // must admit interval sums inside its quantization window, and each
  // unassigned row's transform values are tightened against the slack the
  // other rows leave. Closed bounds plus guard everywhere. The constraints
  // couple rows only within one column of W, so each column is swept to its
  // own fixpoint and columns untouched since the last visit are skipped.
  bool sweep() {
    for (int b = 0; b < mc_; ++b) {
      if (!dirty_[b])
        continue;
      dirty_[b] = 0;
      if (!sweep_col(b))
        return false;
    }
    return true;
  }

  bool sweep_col(int b) {
    for (int i = 0; i < nr_; ++i) {
      cl_[i] = jflo_[static_cast<std::size_t>(i) * mc_ + b];
      ch_[i] = jfhi_[static_cast<std::size_t>(i) * mc_ + b];
    }
    bool tightened = false;
    for (int pass = 0; pass < kMaxSweeps; ++pass) {
      bool changed = false;
      for (int a = 0; a < nr_; ++a) {
        const double *arow = an_.data() + static_cast<std::size_t>(a) * nr_;
        double half = qh_[static_cast<std::size_t>(a) * mc_ + b] + kGuard;
        double slo = 0.0, shi = 0.0;
        for (int i = 0; i < nr_; ++i) {
          double x = arow[i] * cl_[i], y = arow[i] * ch_[i];
          if (x > y)
            std::swap(x, y);
          sclo_[i] = x;
          schi_[i] = y;
          slo += x;
          shi += y;
        }
        if (slo > half || shi < -half)
          return false;
        for (int i = 0; i < nr_; ++i) {
          if (asg_[i])
            continue;
          double c = arow[i];
          if (std::fabs(c) < 1e-12)
            continue;
          double mlo = -half - (shi - schi_[i]);
          double mhi = half - (slo - sclo_[i]);
          if (mlo <= sclo_[i] && mhi >= schi_[i])
            continue;
          double nl, nh;
          if (c > 0.0) {
            nl = mlo / c;
            nh = mhi / c;
          } else {
            nl = mhi / c;
            nh = mlo / c;
          }
          nl -= kDivSlack;
          nh += kDivSlack;
          if (nl > cl_[i] + 1e-12 || nh < ch_[i] - 1e-12) {
            nl = std::max(nl, cl_[i]);
            nh = std::min(nh, ch_[i]);
            if (nl > nh)
              return false;
            cl_[i] = nl;
            ch_[i] = nh;
            double x = c * nl, y = c * nh;
            if (x > y)
              std::swap(x, y);
            slo += x - sclo_[i];
            shi += y - schi_[i];
            sclo_[i] = x;
            schi_[i] = y;
            changed = true;
            tightened = true;
          }
        }
      }
      if (!changed)
        break;
    }
    if (tightened)
      for (int i = 0; i < nr_; ++i) {
        jflo_[static_cast<std::size_t>(i) * mc_ + b] = cl_[i];
        jfhi_[static_cast<std::size_t>(i) * mc_ + b] = ch_[i];
      }
    return true;
  }

  // Shrink each unassigned row's intervals to the envelope of its still
  // admissible candidates, dropping dead candidates from the row's alive
  // mask so deeper nodes never rescan them. The surviving envelope is far
  // tighter than what the interval sums alone give, and the survivor counts
  // drive the fail-first row choice. Masks only ever clear within a node and
  // are restored on backtrack together with the intervals.
  bool envelope(bool &changed) {
    for (int i = 0; i < nr_; ++i) {
      if (asg_[i])
        continue;
      double *flo = jflo_.data() + static_cast<std::size_t>(i) * mc_;
      double *fhi = jfhi_.data() + static_cast<std::size_t>(i) * mc_;
      std::uint64_t *mask = amask_.data() + static_cast<std::size_t>(i) * mw_;
      int alive = 0;
      for (int b = 0; b < mc_; ++b) {
        elo_[b] = std::numeric_limits<double>::infinity();
        ehi_[b] = -std::numeric_limits<double>::infinity();
      }
      for (int wi = 0; wi < mw_; ++wi) {
        std::uint64_t bits = mask[wi];
        while (bits) {
          int bit = std::countr_zero(bits);
          bits &= bits - 1;
          int c = (wi << 6) | bit;
          const double *w = cw_[i].data() + static_cast<std::size_t>(c) * mc_;
          bool ok = true;
          for (int b = 0; b < mc_; ++b)
            if (w[b] < flo[b] - kGuard || w[b] > fhi[b] + kGuard) {
              ok = false;
              break;
            }
          if (!ok) {
            mask[wi] &= ~(std::uint64_t{1} << bit);
            continue;
          }
          ++alive;
          for (int b = 0; b < mc_; ++b) {
            elo_[b] = std::min(elo_[b], w[b]);
            ehi_[b] = std::max(ehi_[b], w[b]);
          }
        }
      }
      if (alive == 0)
        return false;
      acount_[i] = alive;
      for (int b = 0; b < mc_; ++b) {
        double nl = std::max(elo_[b], flo[b]);
        double nh = std::min(ehi_[b], fhi[b]);
        if (nl > flo[b] + 1e-12 || nh < fhi[b] - 1e-12) {
          flo[b] = nl;
          fhi[b] = nh;
          dirty_[b] = 1;
          changed = true;
        }
      }
    }
    return true;
  }

  bool refine() {
    std::fill(dirty_.begin(), dirty_.end(), std::uint8_t{1});
    if (!sweep())
      return false;
    for (int round = 0; round < 4; ++round) {
      bool changed = false;
      if (!envelope(changed))
        return false;
      if (!changed)
        break;
      if (!sweep())
        return false;
    }
    return true;
  }

  Result joint(int t) {
    if (t == nr_) {
      if (verifier_.check(kfull_.data())) {
        ctx_.found.k = kfull_;
        return Result::Found;
      }
      ++ctx_.rejected;
      if (!ctx_.first_rejection)
        ctx_.first_rejection = ctx_.nodes;
      return Result::Done;
    }
    if (!refine())
      return Result::Done;
    int i = -1, best = std::numeric_limits<int>::max();
    for (int r = 0; r < nr_; ++r)
      if (!asg_[r] && acount_[r] < best) {
        best = acount_[r];
        i = r;
      }
    // The row's own mask is stable across the whole loop: children only
    // touch the masks of rows that are still unassigned there.
    const std::uint64_t *mask = amask_.data() + static_cast<std::size_t>(i) * mw_;
    for (int wi = 0; wi < mw_; ++wi) {
      std::uint64_t bits = mask[wi];
      while (bits) {
        int bit = std::countr_zero(bits);
        bits &= bits - 1;
        int c = (wi << 6) | bit;
        const double *w = cw_[i].data() + static_cast<std::size_t>(c) * mc_;
        if (ctx_.budget_hit())
          return Result::Budget;
        ++ctx_.nodes;
        save(t);
        double *mflo = jflo_.data() + static_cast<std::size_t>(i) * mc_;
        double *mfhi = jfhi_.data() + static_cast<std::size_t>(i) * mc_;
        for (int b = 0; b < mc_; ++b) {
          mflo[b] = w[b];
          mfhi[b] = w[b];
        }
        asg_[i] = 1;
        std::memcpy(kfull_.data() + static_cast<std::size_t>(i) * mc_,
                    ck_[i].data() + static_cast<std::size_t>(c) * mc_,
                    mc_ * sizeof(int));
        Result r = joint(t + 1);
        if (r != Result::Done)
          return r;
        asg_[i] = 0;
        restore(t);
      }
    }
    return Result::Done;
  }

  void save(int t) {
    std::size_t sz = static_cast<std::size_t>(nr_) * mc_;
    std::memcpy(s_jflo_.data() + static_cast<std::size_t>(t) * sz,
                jflo_.data(), sz * sizeof(double));
    std::memcpy(s_jfhi_.data() + static_cast<std::size_t>(t) * sz,
                jfhi_.data(), sz * sizeof(double));
    std::size_t mz = static_cast<std::size_t>(nr_) * mw_;
    std::memcpy(s_amask_.data() + static_cast<std::size_t>(t) * mz,
                amask_.data(), mz * sizeof(std::uint64_t));
  }

  void restore(int t) {
    std::size_t sz = static_cast<std::size_t>(nr_) * mc_;
    std::memcpy(jflo_.data(), s_jflo_.data() + static_cast<std::size_t>(t) * sz,
                sz * sizeof(double));
    std::memcpy(jfhi_.data(), s_jfhi_.data() + static_cast<std::size_t>(t) * sz,
                sz * sizeof(double));
    std::size_t mz = static_cast<std::size_t>(nr_) * mw_;
    std::memcpy(amask_.data(), s_amask_.data() + static_cast<std::size_t>(t) * mz,
                mz * sizeof(std::uint64_t));
  }

  const Problem &p_;
  SolveCtx &ctx_;
  int nr_, mc_;
  RawVerifier verifier_;

  std::vector<double> an_, am_; // 1D transform factors, frequency-major
  std::vector<double> qh_;     // half quantization step per frequency
  std::vector<double> rho_;    // entrywise bound on W per (spatial row, b)
  std::vector<double> rr2_;    // squared radius of each row's residual ball

  std::vector<std::vector<int>> ck_;    // candidates per row, flattened
  std::vector<std::vector<double>> cw_; // their transform rows
  std::vector<int> ccount_;
  std::vector<double> wmin_, wmax_; // candidate envelope per (row, b)

  std::vector<double> tmin_, tmax_, sfxlo_, sfxhi_, rpart_;
  std::vector<int> kst_;

  std::vector<double> elo_, ehi_;   // candidate envelope scratch
  std::vector<double> cl_, ch_;     // gathered intervals of the swept column
  std::vector<double> sclo_, schi_; // per-row term intervals of one sweep sum
  std::vector<std::uint8_t> dirty_; // columns touched since their last sweep
  std::vector<int> acount_;         // admissible candidates per unassigned row
  int mw_ = 0;                      // alive mask words per row
  std::vector<std::uint64_t> amask_, s_amask_;
  std::vector<std::uint8_t> asg_;
  std::vector<double> jflo_, jfhi_;
  std::vector<double> s_jflo_, s_jfhi_;
  std::vector<int> kfull_;
};

} // namespace

ConstraintSystem::ConstraintSystem(DctBlock block,
                                   std::shared_ptr<const DctMatrix> matrix,
                                   std::vector<double> e,
                                   std::vector<int> rounded, double eps)
    : block_(std::move(block)), matrix_(std::move(matrix)), e_(std::move(e)),
      rounded_(std::move(rounded)), eps_(eps) {
  int nm = block_.shape.size();
  b_.resize(2 * nm);
  strict_.resize(2 * nm);
  for (int f = 0; f < nm; ++f) {
    double me = 0.0;
    for (int i = 0; i < nm; ++i)
      me += matrix_->at(f, i) * e_[i];
    double half = 0.5 * block_.quant.at(f);
    b_[f] = me + half;
    b_[nm + f] = -me + half;
    bool coeff_negative = block_.coeffs[f] < 0;
    strict_[f] = coeff_negative ? 1 : 0;
    strict_[nm + f] = coeff_negative ? 0 : 1;
  }
}

ConstraintSystem ConstraintSystem::closed() const {
  ConstraintSystem c = *this;
  c.eps_ = 0.0;
  std::fill(c.strict_.begin(), c.strict_.end(), 0);
  return c;
}

bool ConstraintSystem::satisfies(const KVector &k, bool use_eps) const {
  if (static_cast<int>(k.k.size()) != vars())
    throw std::invalid_argument("satisfies: wrong k length");
  for (int r = 0; r < rows(); ++r) {
    double lhs = 0.0;
    for (int i = 0; i < vars(); ++i)
      lhs += a(r, i) * k.k[i];
    double bound = b_[r] - ((use_eps && strict_[r]) ? eps_ : 0.0);
    if (lhs > bound + kGuard)
      return false;
  }
  return true;
}

ConstraintSystem build_constraints(const DctBlock &c, std::span<const double> e,
                                   double eps,
                                   std::shared_ptr<const DctMatrix> matrix) {
  if (!matrix || !(matrix->shape() == c.shape))
    throw std::invalid_argument("build_constraints: matrix shape mismatch");
  if (static_cast<int>(e.size()) != c.shape.size())
    throw std::invalid_argument("build_constraints: wrong e length");
  if (!(eps > 0.0))
    throw std::invalid_argument("build_constraints: eps must be positive");
  DecompResult dec = decompress(c, *matrix);
  return ConstraintSystem(c, std::move(matrix),
                          std::vector<double>(e.begin(), e.end()),
                          std::move(dec.rounded), eps);
}

ConstraintSystem build_constraints(const DctBlock &c, double eps,
                                   std::shared_ptr<const DctMatrix> matrix) {
  if (!matrix || !(matrix->shape() == c.shape))
    throw std::invalid_argument("build_constraints: matrix shape mismatch");
  if (!(eps > 0.0))
    throw std::invalid_argument("build_constraints: eps must be positive");
  DecompResult dec = decompress(c, *matrix);
  return ConstraintSystem(c, std::move(matrix), std::move(dec.e),
                          std::move(dec.rounded), eps);
}

std::vector<std::pair<int, int>> k_bounds(const ConstraintSystem &sys) {
  std::vector<int> lo, hi;
  box_from_columns(sys.matrix(), sys.block().quant, sys.e(), lo, hi);
  std::vector<std::pair<int, int>> out(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i)
    out[i] = {lo[i], hi[i]};
  return out;
}

AntecedentCheck verify_antecedent(const KVector &k, const DctBlock &c,
                                  const DctMatrix &m) {
  if (static_cast<int>(k.k.size()) != c.shape.size())
    throw std::invalid_argument("verify_antecedent: wrong k length");
  DecompResult dec = decompress(c, m);
  std::vector<int> pixels(k.k.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = dec.rounded[i] - k.k[i];
    if (pixels[i] < 0 || pixels[i] > 255)
      return AntecedentCheck::OutOfRange;
  }
  CompressResult back =
      compress(PixelBlock(c.shape, std::move(pixels)), c.quant, m);
  return back.block.coeffs == c.coeffs ? AntecedentCheck::Verified
                                       : AntecedentCheck::Mismatch;
}

namespace {

// Shared odometer walk for the reference search. Calls fn(k) for every box
// point in lexicographic order until fn returns true; returns candidates
// visited.
template <typename Fn>
std::uint64_t walk_box(const std::vector<int> &lo, const std::vector<int> &hi,
                       Fn &&fn) {
  int n = static_cast<int>(lo.size());
  std::vector<int> k = lo;
  std::uint64_t visited = 0;
  while (true) {
    ++visited;
    if (fn(k))
      return visited;
    int i = n - 1;
    while (i >= 0 && k[i] == hi[i]) {
      k[i] = lo[i];
      --i;
    }
    if (i < 0)
      return visited;
    ++k[i];
  }
}

struct EnumSetup {
  std::vector<int> lo, hi;
  DecompResult dec;
  bool empty = false;
};

EnumSetup enum_setup(const DctBlock &c, const DctMatrix &m,
                     std::uint64_t cap) {
  if (!(c.shape == m.shape()))
    throw std::invalid_argument("brute_force_antecedent: shape mismatch");
  EnumSetup s;
  s.dec = decompress(c, m);
  box_from_columns(m, c.quant, s.dec.e, s.lo, s.hi);

  std::uint64_t total = 1;
  for (std::size_t i = 0; i < s.lo.size(); ++i) {
    std::uint64_t w =
        static_cast<std::uint64_t>(static_cast<std::int64_t>(s.hi[i]) -
                                   s.lo[i] + 1);
    if (w == 0 || total > cap / w)
      throw EnumerationCapError("candidate box larger than enumeration cap");
    total *= w;
  }

  for (std::size_t i = 0; i < s.lo.size(); ++i) {
    s.lo[i] = std::max(s.lo[i], s.dec.rounded[i] - 255);
    s.hi[i] = std::min(s.hi[i], s.dec.rounded[i]);
    if (s.lo[i] > s.hi[i])
      s.empty = true;
  }
  return s;
}

} // namespace

Verdict brute_force_antecedent(const DctBlock &c, const DctMatrix &m,
                               std::uint64_t cap) {
  auto t0 = Clock::now();
  EnumSetup s = enum_setup(c, m, cap);
  Verdict v;
  if (s.empty) {
    v.kind = VerdictKind::Infeasible;
    v.elapsed_seconds = seconds_since(t0);
    return v;
  }
  RawVerifier verifier(c, m, s.dec.rounded);
  std::optional<KVector> hit;
  v.nodes = walk_box(s.lo, s.hi, [&](const std::vector<int> &k) {
    if (verifier.check(k.data())) {
      hit = KVector{k};
      return true;
    }
    return false;
  });
  if (hit) {
    v.kind = VerdictKind::Feasible;
    v.k = std::move(hit);
  } else {
    v.kind = VerdictKind::Infeasible;
  }
  v.elapsed_seconds = seconds_since(t0);
  return v;
}

std::vector<KVector> enumerate_antecedents(const DctBlock &c,
                                           const DctMatrix &m,
                                           std::uint64_t cap) {
  EnumSetup s = enum_setup(c, m, cap);
  std::vector<KVector> out;
  if (s.empty)
    return out;
  RawVerifier verifier(c, m, s.dec.rounded);
  walk_box(s.lo, s.hi, [&](const std::vector<int> &k) {
    if (verifier.check(k.data()))
      out.push_back(KVector{k});
    return false;
  });
  return out;
}

Verdict solve_feasibility(const ConstraintSystem &sys, const Budget &budget) {
  if (budget.max_nodes && *budget.max_nodes == 0)
    throw std::invalid_argument("solve_feasibility: node budget is zero");
  if (budget.max_seconds && !(*budget.max_seconds > 0.0))
    throw std::invalid_argument("solve_feasibility: time budget must be positive");

  auto t0 = Clock::now();
  Problem p = make_problem(sys);

  Verdict v;
  if (p.empty) {
    // No k can map the rounded decompression back into [0, 255]; the closed
    // region is empty regardless of eps.
    v.kind = VerdictKind::Infeasible;
    v.elapsed_seconds = seconds_since(t0);
    return v;
  }

  SolveCtx ctx;
  ctx.budget = &budget;
  ctx.t0 = t0;

  auto fill = [&](VerdictKind kind) {
    v.kind = kind;
    v.nodes = ctx.nodes;
    v.rejected_candidates = ctx.rejected;
    v.first_rejection_node = ctx.first_rejection;
    v.elapsed_seconds = seconds_since(t0);
  };
  auto budget_verdict = [&] {
    if (ctx.rejected > 0) {
      fill(VerdictKind::Ignored);
      v.reason = "unverified-candidate";
    } else {
      fill(VerdictKind::Exhausted);
      v.reason = ctx.budget_reason;
    }
  };

  {
    RawVerifier verifier(sys.block(), sys.matrix(), p.rounded);
    DecodeOutcome dec = greedy_decode(p, verifier);
    if (dec.verified) {
      fill(VerdictKind::Feasible);
      v.k = KVector{std::move(dec.k)};
      return v;
    }
    if (dec.rejected) {
      ++ctx.rejected;
      ctx.first_rejection = ctx.nodes;
    }
  }

  {
    SepSolver sep(p, ctx);
    SepSolver::Result rs = sep.run();
    if (rs == SepSolver::Result::Found) {
      fill(VerdictKind::Feasible);
      v.k = ctx.found;
      return v;
    }
    if (rs == SepSolver::Result::Budget) {
      budget_verdict();
      return v;
    }
    if (rs == SepSolver::Result::Done) {
      // Closed exhaustive enumeration with every leaf checked against the
      // exact verifier, so no eps-shrunk interior pass is needed.
      fill(VerdictKind::Infeasible);
      return v;
    }
    // A row overflowed the candidate cap; fall back to the interval tree.
  }

  Pass pass1(p, true, ctx);
  Pass::Result r1 = pass1.run();
  if (r1 == Pass::Result::Found) {
    fill(VerdictKind::Feasible);
    v.k = ctx.found;
    return v;
  }
  if (r1 == Pass::Result::Budget) {
    budget_verdict();
    return v;
  }

  if (!ctx.sensitive) {
    // Every pass-1 decision had margin beyond eps, so the closed tree is the
    // same tree and a second pass cannot change the outcome.
    fill(VerdictKind::Infeasible);
    return v;
  }

  v.closed_recheck = true;
  Pass pass2(p, false, ctx);
  Pass::Result r2 = pass2.run();
  if (r2 == Pass::Result::Found) {
    fill(VerdictKind::Feasible);
    v.k = ctx.found;
    v.closed_recheck = true;
    return v;
  }
  if (r2 == Pass::Result::Budget) {
    budget_verdict();
    v.closed_recheck = true;
    return v;
  }
  fill(VerdictKind::Infeasible);
  v.closed_recheck = true;
  return v;
}

} // namespace jcompat
