#pragma once

#include "jcompat/detect.hpp"
#include "jcompat/embedding.hpp"
#include "jcompat/image.hpp"
#include "jcompat/results.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jcompat {

// A bounded input ran out of blocks before the requested sample count.
class SourceExhausted : public IoError {
public:
  using IoError::IoError;
};

// Shared knobs of the three batch experiments. The seed is mandatory and is
// the root of every derived stream (images, modifications, embeddings), so a
// config reproduces its outputs exactly.
struct ExperimentConfig {
  BlockShape shape;
  QuantTable quant;
  std::uint64_t seed = 0;
  int samples = 0; // blocks per point, or images, depending on experiment
  int max_changes = 6;
  double payload = 0.0;
  std::string input_dir; // empty: seeded synthetic images
  int image_size = 256;
  int smoothness = 2;
  std::vector<std::uint64_t> node_budgets; // timing sweep
  std::vector<double> second_budgets;      // timing sweep, wall-clock mode
  double eps = kDefaultEps;

  explicit ExperimentConfig(BlockShape s)
      : shape(s), quant(quant_table_qf100(s)) {}
};

// Incompatibility rate of blocks carrying p random +-1 changes, for p = 0
// (cover baseline) through max_changes. Every block is solved to completion;
// blocks whose cover or modified decompression clips are passed over. One
// row per p.
ResultTable run_incompat_rate(const ExperimentConfig &config);

// Per-image detection at a fixed embedding payload: each image is analyzed
// as cover and as its embedded copy, both with full solves. One row per
// image.
ResultTable run_payload_detect(const ExperimentConfig &config);

struct TimingResult {
  ResultTable curve;  // one row per budget: P_E and optimal threshold
  ResultTable ratios; // one row per (budget, class, image): detector score
};

// Budget sweep over cover/stego image pairs embedded at config.payload.
// Budgets come from node_budgets, or second_budgets when node_budgets is
// empty (wall-clock runs are not byte-reproducible).
TimingResult run_timing(const ExperimentConfig &config);

} // namespace jcompat
