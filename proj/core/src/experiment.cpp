#include "jcompat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace jcompat {

namespace {

// Disjoint substream tags under the root seed.
constexpr std::uint64_t kImageTag = 1;
constexpr std::uint64_t kModifyTag = 2;
constexpr std::uint64_t kEmbedTag = 3;

std::string shape_str(BlockShape s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

std::string quant_str(const QuantTable &q) {
  for (int s : q.steps())
    if (s != 1)
      return "custom";
  return "qf100";
}

std::vector<std::string> list_pgm_files(const std::string &dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw IoError("input dir not found: " + dir);
  std::vector<std::string> files;
  for (const auto &entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path().string());
  }
  if (ec)
    throw IoError("cannot list " + dir + ": " + ec.message());
  if (files.empty())
    throw IoError("no .pgm files in " + dir);
  std::sort(files.begin(), files.end());
  return files;
}

// Serves cover images by index: synthetic ones are derived from the seed and
// never run out, directory ones are the sorted .pgm files.
class ImageProvider {
public:
  explicit ImageProvider(const ExperimentConfig &cfg) : cfg_(&cfg) {
    if (!cfg.input_dir.empty())
      files_ = list_pgm_files(cfg.input_dir);
  }

  GrayImage get(std::uint64_t index) const {
    if (files_.empty())
      return gen_synthetic(Rng::derive(Rng::derive(cfg_->seed, kImageTag), index),
                           cfg_->image_size, cfg_->image_size,
                           cfg_->smoothness);
    if (index >= files_.size())
      throw SourceExhausted("input dir exhausted after " +
                            std::to_string(files_.size()) + " images");
    return load_pgm(files_[index]);
  }

  bool bounded() const { return !files_.empty(); }

private:
  const ExperimentConfig *cfg_;
  std::vector<std::string> files_;
};

// Endless cover-block stream for one sampling lane. Synthetic lanes draw
// disjoint image substreams; a directory source is a fixed corpus, so every
// lane walks the same files from the start.
class BlockStream {
public:
  BlockStream(const ExperimentConfig &cfg, const ImageProvider &provider,
              std::uint64_t lane)
      : cfg_(&cfg), provider_(&provider), lane_(lane) {}

  PixelBlock next() {
    while (qpos_ >= queue_.size()) {
      std::uint64_t index =
          provider_->bounded() ? img_index_ : (lane_ << 32 | img_index_);
      queue_ = split_blocks(provider_->get(index), cfg_->shape);
      qpos_ = 0;
      ++img_index_;
      if (queue_.empty())
        throw IoError("image smaller than one block");
    }
    return queue_[qpos_++];
  }

private:
  const ExperimentConfig *cfg_;
  const ImageProvider *provider_;
  std::uint64_t lane_;
  std::uint64_t img_index_ = 0;
  std::vector<PixelBlock> queue_;
  std::size_t qpos_ = 0;
};

void check_common(const ExperimentConfig &cfg) {
  if (cfg.samples < 1)
    throw std::invalid_argument("experiment: samples must be positive");
  if (!(cfg.quant.shape() == cfg.shape))
    throw std::invalid_argument("experiment: quant table shape mismatch");
  if (!(cfg.eps > 0.0))
    throw std::invalid_argument("experiment: eps must be positive");
}

struct ImagePair {
  std::vector<DctBlock> cover;
  std::vector<DctBlock> stego;
  std::size_t changes = 0;
  int modified_blocks = 0;
};

ImagePair make_pair(const ExperimentConfig &cfg, const ImageProvider &provider,
                    const DctMatrix &m, std::uint64_t index) {
  ImagePair pair;
  std::vector<PixelBlock> blocks =
      split_blocks(provider.get(index), cfg.shape);
  if (blocks.empty())
    throw IoError("image smaller than one block");
  pair.cover.reserve(blocks.size());
  for (const PixelBlock &b : blocks)
    pair.cover.push_back(compress(b, cfg.quant, m).block);

  std::uint64_t embed_seed =
      Rng::derive(Rng::derive(cfg.seed, kEmbedTag), index);
  Rng rng(embed_seed);
  EmbeddingParams params{cfg.payload, embed_seed};
  auto [stego, set] = lsbm_embed(pair.cover, params, rng);
  pair.stego = std::move(stego);
  pair.changes = set.size();
  pair.modified_blocks = set.blocks_touched();
  return pair;
}

} // namespace

ResultTable run_incompat_rate(const ExperimentConfig &cfg) {
  check_common(cfg);
  if (cfg.max_changes < 0 || cfg.max_changes > cfg.shape.size())
    throw std::invalid_argument("incompat-rate: max_changes outside [0, nm]");

  auto m = std::make_shared<const DctMatrix>(dct_matrix(cfg.shape));
  ImageProvider provider(cfg);

  ResultTable t({"experiment", "shape", "quant", "source", "seed", "p",
                 "samples", "incompatible", "proportion", "ci_half_width",
                 "mean_nodes"});
  std::string source = cfg.input_dir.empty() ? "synthetic" : cfg.input_dir;

  for (int p = 0; p <= cfg.max_changes; ++p) {
    Rng mod_rng(Rng::derive(Rng::derive(cfg.seed, kModifyTag), p));
    BlockStream stream(cfg, provider, static_cast<std::uint64_t>(p));
    int done = 0, incompatible = 0;
    std::uint64_t nodes_total = 0;
    while (done < cfg.samples) {
      PixelBlock x = stream.next();
      CompressResult cr = compress(x, cfg.quant, *m);
      DecompResult dec = decompress(cr.block, *m);
      if (dec.clipped)
        continue;
      DctBlock blk = cr.block;
      if (p > 0) {
        auto [modified, set] = modify_random(blk, p, mod_rng);
        DecompResult mdec = decompress(modified, *m);
        if (mdec.clipped)
          continue;
        blk = std::move(modified);
        dec = std::move(mdec);
      }
      ConstraintSystem sys(blk, m, std::move(dec.e), std::move(dec.rounded),
                           cfg.eps);
      Verdict v = solve_feasibility(sys, Budget::unlimited());
      ++done;
      nodes_total += v.nodes;
      if (v.infeasible())
        ++incompatible;
    }
    double prop = static_cast<double>(incompatible) / done;
    double ci = 1.96 * std::sqrt(prop * (1.0 - prop) / done);
    t.add_row({"incompat-rate", shape_str(cfg.shape), quant_str(cfg.quant),
               source, ResultTable::format_int(static_cast<std::int64_t>(cfg.seed)),
               ResultTable::format_int(p), ResultTable::format_int(done),
               ResultTable::format_int(incompatible),
               ResultTable::format_double(prop), ResultTable::format_double(ci),
               ResultTable::format_double(static_cast<double>(nodes_total) /
                                          done)});
  }
  return t;
}

ResultTable run_payload_detect(const ExperimentConfig &cfg) {
  check_common(cfg);
  if (cfg.payload < 0.0 || cfg.payload > 1.0)
    throw std::invalid_argument("payload-detect: payload outside [0, 1]");

  auto m = std::make_shared<const DctMatrix>(dct_matrix(cfg.shape));
  ImageProvider provider(cfg);

  ResultTable t({"experiment", "shape", "payload", "image", "n_blocks",
                 "changes", "modified_blocks", "stego_incompatible",
                 "stego_skipped", "stego_proven", "cover_incompatible",
                 "cover_skipped"});

  for (int i = 0; i < cfg.samples; ++i) {
    ImagePair pair = make_pair(cfg, provider, *m, i);

    auto classify_all = [&](const std::vector<DctBlock> &blocks) {
      std::vector<BlockReport> reports;
      reports.reserve(blocks.size());
      for (std::size_t j = 0; j < blocks.size(); ++j) {
        BlockReport r =
            classify_block(blocks[j], Budget::unlimited(), m, cfg.eps);
        r.index = static_cast<int>(j);
        reports.push_back(std::move(r));
      }
      return reports;
    };
    ImageScore cover_score = score_image(classify_all(pair.cover));
    ImageScore stego_score = score_image(classify_all(pair.stego));

    t.add_row({"payload-detect", shape_str(cfg.shape),
               ResultTable::format_double(cfg.payload),
               ResultTable::format_int(i),
               ResultTable::format_int(stego_score.n_blocks),
               ResultTable::format_int(static_cast<std::int64_t>(pair.changes)),
               ResultTable::format_int(pair.modified_blocks),
               ResultTable::format_int(stego_score.n_incompatible),
               ResultTable::format_int(stego_score.n_skipped),
               stego_score.stego_proven ? "1" : "0",
               ResultTable::format_int(cover_score.n_incompatible),
               ResultTable::format_int(cover_score.n_skipped)});
  }
  return t;
}

TimingResult run_timing(const ExperimentConfig &cfg) {
  check_common(cfg);
  if (cfg.payload < 0.0 || cfg.payload > 1.0)
    throw std::invalid_argument("timing: payload outside [0, 1]");
  if (!cfg.node_budgets.empty() && !cfg.second_budgets.empty())
    throw std::invalid_argument("timing: choose node or time budgets, not both");
  if (cfg.node_budgets.empty() && cfg.second_budgets.empty())
    throw std::invalid_argument("timing: no budgets given");

  auto m = std::make_shared<const DctMatrix>(dct_matrix(cfg.shape));
  ImageProvider provider(cfg);

  std::vector<std::vector<DctBlock>> cover, stego;
  for (int i = 0; i < cfg.samples; ++i) {
    ImagePair pair = make_pair(cfg, provider, *m, i);
    cover.push_back(std::move(pair.cover));
    stego.push_back(std::move(pair.stego));
  }

  bool node_mode = !cfg.node_budgets.empty();
  std::vector<Budget> budgets;
  if (node_mode)
    for (std::uint64_t n : cfg.node_budgets)
      budgets.push_back(Budget::nodes(n));
  else
    for (double s : cfg.second_budgets)
      budgets.push_back(Budget::seconds(s));

  DetectorCurve curve = timing_curve(cover, stego, budgets, m, cfg.eps);

  TimingResult out{
      ResultTable({"experiment", "shape", "payload", "budget_kind", "budget",
                   "pe", "tau", "p_fa", "p_md"}),
      ResultTable({"experiment", "shape", "payload", "budget_kind", "budget",
                   "class", "image", "score"})};

  std::string kind = node_mode ? "nodes" : "seconds";
  for (const CurvePoint &pt : curve.points) {
    std::string budget_value =
        node_mode ? ResultTable::format_int(
                        static_cast<std::int64_t>(*pt.budget.max_nodes))
                  : ResultTable::format_double(*pt.budget.max_seconds);
    out.curve.add_row({"timing", shape_str(cfg.shape),
                       ResultTable::format_double(cfg.payload), kind,
                       budget_value, ResultTable::format_double(pt.pe.pe),
                       ResultTable::format_double(pt.pe.tau),
                       ResultTable::format_double(pt.pe.p_fa),
                       ResultTable::format_double(pt.pe.p_md)});
    auto emit = [&](const std::vector<double> &scores, const char *cls) {
      for (std::size_t i = 0; i < scores.size(); ++i)
        out.ratios.add_row({"timing", shape_str(cfg.shape),
                            ResultTable::format_double(cfg.payload), kind,
                            budget_value, cls,
                            ResultTable::format_int(static_cast<std::int64_t>(i)),
                            ResultTable::format_double(scores[i])});
    };
    emit(pt.cover_scores, "cover");
    emit(pt.stego_scores, "stego");
  }
  return out;
}

} // namespace jcompat
