#include "jcompat/detect.hpp"

#include <algorithm>
#include <cmath>

namespace jcompat {

namespace {

BlockOutcome outcome_of(VerdictKind k) {
  switch (k) {
  case VerdictKind::Feasible:
    return BlockOutcome::Feasible;
  case VerdictKind::Infeasible:
    return BlockOutcome::Incompatible;
  case VerdictKind::Exhausted:
    return BlockOutcome::Unsolved;
  case VerdictKind::Ignored:
    return BlockOutcome::Ignored;
  }
  return BlockOutcome::Unsolved;
}

// Result of one full-budget solve, enough to reconstruct the verdict any
// smaller node budget would have produced.
struct SolveTrace {
  bool skipped = false;
  VerdictKind kind = VerdictKind::Exhausted;
  std::uint64_t nodes = 0;
  std::optional<std::uint64_t> first_rejection;
};

BlockOutcome outcome_at(const SolveTrace &t, std::uint64_t budget) {
  if (t.skipped)
    return BlockOutcome::Skipped;
  bool decided =
      t.kind == VerdictKind::Feasible || t.kind == VerdictKind::Infeasible;
  if (decided && t.nodes <= budget)
    return outcome_of(t.kind);
  // The prefix up to `budget` is shared with the full run, so the budgeted
  // search stops undecided; whether it had already met a failing candidate
  // decides between Ignored and Unsolved.
  if (t.first_rejection && *t.first_rejection <= budget)
    return BlockOutcome::Ignored;
  return BlockOutcome::Unsolved;
}

ImageScore tally(std::span<const BlockOutcome> outcomes) {
  ImageScore s;
  s.n_blocks = static_cast<int>(outcomes.size());
  for (BlockOutcome o : outcomes) {
    switch (o) {
    case BlockOutcome::Feasible:
      ++s.n_feasible;
      break;
    case BlockOutcome::Incompatible:
      ++s.n_incompatible;
      break;
    case BlockOutcome::Unsolved:
      ++s.n_unsolved;
      break;
    case BlockOutcome::Ignored:
      ++s.n_ignored;
      break;
    case BlockOutcome::Skipped:
      ++s.n_skipped;
      break;
    }
  }
  int denom = s.n_blocks - s.n_skipped - s.n_ignored;
  s.unsolved_ratio = denom > 0 ? static_cast<double>(s.n_unsolved) / denom : 0.0;
  s.stego_proven = s.n_incompatible > 0;
  return s;
}

} // namespace

BlockReport classify_block(const DctBlock &c, const Budget &budget,
                           const std::shared_ptr<const DctMatrix> &m,
                           double eps) {
  if (!m || !(m->shape() == c.shape))
    throw std::invalid_argument("classify_block: matrix shape mismatch");
  DecompResult dec = decompress(c, *m);
  BlockReport r;
  r.clipped = dec.clipped;
  if (dec.clipped) {
    r.outcome = BlockOutcome::Skipped;
    return r;
  }
  ConstraintSystem sys(c, m, std::move(dec.e), std::move(dec.rounded), eps);
  Verdict v = solve_feasibility(sys, budget);
  r.outcome = outcome_of(v.kind);
  r.nodes = v.nodes;
  r.elapsed_seconds = v.elapsed_seconds;
  r.verdict = std::move(v);
  return r;
}

ImageScore score_image(std::span<const BlockReport> reports) {
  if (reports.empty())
    throw std::invalid_argument("score_image: no blocks");
  std::vector<BlockOutcome> outcomes(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i)
    outcomes[i] = reports[i].outcome;
  return tally(outcomes);
}

double detector_score(const ImageScore &s) {
  return s.stego_proven ? 2.0 : s.unsolved_ratio;
}

PeResult pe_min(std::span<const double> cover_scores,
                std::span<const double> stego_scores) {
  if (cover_scores.empty() || stego_scores.empty())
    throw std::invalid_argument("pe_min: empty score list");

  std::vector<double> cover(cover_scores.begin(), cover_scores.end());
  std::vector<double> stego(stego_scores.begin(), stego_scores.end());
  std::sort(cover.begin(), cover.end());
  std::sort(stego.begin(), stego.end());

  std::vector<double> taus;
  taus.reserve(cover.size() + stego.size() + 1);
  taus.insert(taus.end(), cover.begin(), cover.end());
  taus.insert(taus.end(), stego.begin(), stego.end());
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  taus.insert(taus.begin(), taus.front() - 1.0); // classify-everything-stego

  PeResult best;
  best.pe = 1.0;
  bool first = true;
  for (double tau : taus) {
    auto above = [tau](const std::vector<double> &v) {
      return v.end() - std::upper_bound(v.begin(), v.end(), tau);
    };
    double p_fa = static_cast<double>(above(cover)) / cover.size();
    double p_md =
        static_cast<double>(stego.size() - above(stego)) / stego.size();
    double pe = 0.5 * (p_fa + p_md);
    best.sweep.push_back({tau, p_fa, p_md, pe});
    if (first || pe < best.pe || (pe == best.pe && p_fa < best.p_fa)) {
      best.pe = pe;
      best.tau = tau;
      best.p_fa = p_fa;
      best.p_md = p_md;
      first = false;
    }
  }
  return best;
}

double expected_miss(double p_single, int r) {
  if (p_single < 0.0 || p_single > 1.0)
    throw std::invalid_argument("expected_miss: probability outside [0, 1]");
  if (r < 0)
    throw std::invalid_argument("expected_miss: negative block count");
  return std::pow(1.0 - p_single, r);
}

DetectorCurve timing_curve(const std::vector<std::vector<DctBlock>> &cover,
                           const std::vector<std::vector<DctBlock>> &stego,
                           std::span<const Budget> budgets,
                           const std::shared_ptr<const DctMatrix> &m,
                           double eps) {
  if (cover.empty() || stego.empty())
    throw std::invalid_argument("timing_curve: empty image set");
  if (budgets.empty())
    throw std::invalid_argument("timing_curve: no budgets");
  bool node_mode = budgets[0].max_nodes.has_value();
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    const Budget &b = budgets[i];
    if (b.max_nodes.has_value() == b.max_seconds.has_value())
      throw std::invalid_argument(
          "timing_curve: each budget needs exactly one limit");
    if (b.max_nodes.has_value() != node_mode)
      throw std::invalid_argument("timing_curve: mixed budget kinds");
    if (i > 0) {
      bool ascending =
          node_mode ? *budgets[i - 1].max_nodes < *b.max_nodes
                    : *budgets[i - 1].max_seconds < *b.max_seconds;
      if (!ascending)
        throw std::invalid_argument("timing_curve: budgets must ascend");
    }
  }

  DetectorCurve curve;

  if (node_mode) {
    std::uint64_t top = *budgets.back().max_nodes;
    auto trace_images = [&](const std::vector<std::vector<DctBlock>> &images) {
      std::vector<std::vector<SolveTrace>> traces(images.size());
      for (std::size_t i = 0; i < images.size(); ++i) {
        traces[i].reserve(images[i].size());
        for (const DctBlock &blk : images[i]) {
          BlockReport r = classify_block(blk, Budget::nodes(top), m, eps);
          SolveTrace t;
          t.skipped = r.outcome == BlockOutcome::Skipped;
          if (r.verdict) {
            t.kind = r.verdict->kind;
            t.nodes = r.verdict->nodes;
            t.first_rejection = r.verdict->first_rejection_node;
          }
          traces[i].push_back(t);
        }
      }
      return traces;
    };
    auto cover_traces = trace_images(cover);
    auto stego_traces = trace_images(stego);

    auto scores_at = [](const std::vector<std::vector<SolveTrace>> &traces,
                        std::uint64_t b) {
      std::vector<double> scores;
      scores.reserve(traces.size());
      for (const auto &img : traces) {
        std::vector<BlockOutcome> outs(img.size());
        for (std::size_t j = 0; j < img.size(); ++j)
          outs[j] = outcome_at(img[j], b);
        scores.push_back(detector_score(tally(outs)));
      }
      return scores;
    };

    for (const Budget &b : budgets) {
      CurvePoint pt;
      pt.budget = b;
      pt.cover_scores = scores_at(cover_traces, *b.max_nodes);
      pt.stego_scores = scores_at(stego_traces, *b.max_nodes);
      pt.pe = pe_min(pt.cover_scores, pt.stego_scores);
      curve.points.push_back(std::move(pt));
    }
    return curve;
  }

  for (const Budget &b : budgets) {
    CurvePoint pt;
    pt.budget = b;
    auto run = [&](const std::vector<std::vector<DctBlock>> &images,
                   std::vector<double> &scores) {
      for (const auto &img : images) {
        std::vector<BlockReport> reports;
        reports.reserve(img.size());
        for (const DctBlock &blk : img)
          reports.push_back(classify_block(blk, b, m, eps));
        scores.push_back(detector_score(score_image(reports)));
      }
    };
    run(cover, pt.cover_scores);
    run(stego, pt.stego_scores);
    pt.pe = pe_min(pt.cover_scores, pt.stego_scores);
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

} // namespace jcompat
