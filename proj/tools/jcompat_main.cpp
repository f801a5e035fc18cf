// Command-line front end: block-level feasibility checks and the batch
// experiments, with CSV/JSON output.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 internal failure.

#include "jcompat/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

namespace {

using namespace jcompat;

BlockShape parse_shape(const std::string &text) {
  auto x = text.find('x');
  if (x == std::string::npos)
    throw std::invalid_argument("shape must look like 8x8");
  try {
    int rows = std::stoi(text.substr(0, x));
    int cols = std::stoi(text.substr(x + 1));
    return BlockShape(rows, cols);
  } catch (const std::invalid_argument &) {
    throw std::invalid_argument("shape must look like 8x8");
  } catch (const std::out_of_range &) {
    throw std::invalid_argument("shape out of range");
  }
}

QuantTable load_quant(const std::string &path, BlockShape shape) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open quant table " + path);
  std::vector<int> steps;
  int v;
  while (in >> v)
    steps.push_back(v);
  if (static_cast<int>(steps.size()) != shape.size())
    throw IoError("quant table " + path + " has " +
                  std::to_string(steps.size()) + " entries, expected " +
                  std::to_string(shape.size()));
  return QuantTable(shape, std::move(steps));
}

std::vector<int> parse_int_list(const std::string &text, int expected,
                                const char *what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(std::stoi(item));
  if (expected >= 0 && static_cast<int>(out.size()) != expected)
    throw std::invalid_argument(std::string(what) + ": expected " +
                                std::to_string(expected) + " values, got " +
                                std::to_string(out.size()));
  return out;
}

std::string vec_to_str(std::span<const int> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

std::string vec_to_str(std::span<const double> v) {
  char buf[32];
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ", ";
    std::snprintf(buf, sizeof(buf), "%.6f", v[i]);
    s += buf;
  }
  return s + "]";
}

// CSV goes to `out` exactly; the JSON twin swaps a .csv extension or appends
// .json otherwise.
std::string json_twin(const std::string &out) {
  if (out.size() > 4 && out.ends_with(".csv"))
    return out.substr(0, out.size() - 4) + ".json";
  return out + ".json";
}

std::string ratios_path(const std::string &out) {
  if (out.size() > 4 && out.ends_with(".csv"))
    return out.substr(0, out.size() - 4) + "_ratios.csv";
  return out + "_ratios";
}

void write_table(const ResultTable &t, const std::string &out) {
  t.write_csv(out);
  t.write_json(json_twin(out));
  std::cout << "wrote " << out << " and " << json_twin(out) << "\n";
}

struct VerifyBlockArgs {
  std::string shape_text = "8x8";
  std::string pixels_text;
  std::string coeffs_text;
  std::string quant_path;
  std::uint64_t budget_nodes = 0;
  double budget_seconds = 0.0;
  double eps = kDefaultEps;
  bool brute = false;
  bool list_all = false;
};

int cmd_verify_block(const VerifyBlockArgs &args) {
  BlockShape shape = parse_shape(args.shape_text);
  QuantTable quant = args.quant_path.empty()
                         ? quant_table_qf100(shape)
                         : load_quant(args.quant_path, shape);
  auto m = std::make_shared<const DctMatrix>(dct_matrix(shape));

  if (args.pixels_text.empty() == args.coeffs_text.empty())
    throw std::invalid_argument(
        "verify-block: give exactly one of --pixels or --coeffs");

  std::cout << "shape: " << shape.rows << "x" << shape.cols << "\n";
  std::optional<DctBlock> block;
  if (!args.pixels_text.empty()) {
    PixelBlock x(shape,
                 parse_int_list(args.pixels_text, shape.size(), "--pixels"));
    std::cout << "pixels: " << vec_to_str(x.values) << "\n";
    CompressResult cr = compress(x, quant, *m);
    std::cout << "coefficients: " << vec_to_str(cr.block.coeffs) << "\n";
    std::cout << "quantization error u: " << vec_to_str(cr.error.u) << "\n";
    block = std::move(cr.block);
  } else {
    block = DctBlock(
        shape, parse_int_list(args.coeffs_text, shape.size(), "--coeffs"),
        quant);
    std::cout << "coefficients: " << vec_to_str(block->coeffs) << "\n";
  }

  DecompResult dec = decompress(*block, *m);
  std::cout << "rounded decompression: " << vec_to_str(dec.rounded)
            << (dec.clipped ? "  (clipped: detector would skip this block)"
                            : "")
            << "\n";
  std::cout << "rounding error e: " << vec_to_str(dec.e) << "\n";

  Budget budget;
  if (args.budget_nodes > 0)
    budget.max_nodes = args.budget_nodes;
  if (args.budget_seconds > 0)
    budget.max_seconds = args.budget_seconds;

  ConstraintSystem sys = build_constraints(*block, dec.e, args.eps, m);
  Verdict v = solve_feasibility(sys, budget);

  const char *kind = "";
  switch (v.kind) {
  case VerdictKind::Feasible:
    kind = "feasible";
    break;
  case VerdictKind::Infeasible:
    kind = "infeasible (no integer pixel block compresses to this)";
    break;
  case VerdictKind::Exhausted:
    kind = "exhausted (budget spent, undecided)";
    break;
  case VerdictKind::Ignored:
    kind = "ignored (budget spent; candidates failed verification)";
    break;
  }
  std::cout << "verdict: " << kind << "\n";
  if (v.k) {
    std::vector<int> antecedent(shape.size());
    for (int i = 0; i < shape.size(); ++i)
      antecedent[i] = dec.rounded[i] - v.k->k[i];
    std::cout << "k: " << vec_to_str(v.k->k) << "\n";
    std::cout << "antecedent: " << vec_to_str(antecedent) << "\n";
    bool ok = verify_antecedent(*v.k, *block, *m) == AntecedentCheck::Verified;
    std::cout << "verification: " << (ok ? "ok" : "FAILED") << "\n";
  }
  std::printf("nodes: %llu\nelapsed: %.6f s\n",
              static_cast<unsigned long long>(v.nodes), v.elapsed_seconds);

  if (args.brute) {
    Verdict bf = brute_force_antecedent(*block, *m);
    std::cout << "brute force: "
              << (bf.feasible() ? "feasible" : "infeasible") << " after "
              << bf.nodes << " candidates"
              << (bf.kind == v.kind ? " (agrees)" : " (DISAGREES)") << "\n";
  }
  if (args.list_all) {
    std::vector<KVector> all = enumerate_antecedents(*block, *m);
    std::cout << "antecedents (" << all.size() << "):\n";
    for (const KVector &k : all) {
      std::vector<int> antecedent(shape.size());
      for (int i = 0; i < shape.size(); ++i)
        antecedent[i] = dec.rounded[i] - k.k[i];
      std::cout << "  " << vec_to_str(antecedent) << "  k=" << vec_to_str(k.k)
                << "\n";
    }
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Decide whether quantized DCT blocks have integer pixel "
               "antecedents, and run the derived steganalysis experiments"};
  app.require_subcommand(1);

  VerifyBlockArgs vb;
  CLI::App *verify = app.add_subcommand(
      "verify-block", "Analyze a single block (pixels or coefficients)");
  verify->add_option("--shape", vb.shape_text, "Block shape, e.g. 8x8");
  verify->add_option("--pixels", vb.pixels_text,
                     "Comma-separated pixel values, row-major");
  verify->add_option("--coeffs", vb.coeffs_text,
                     "Comma-separated quantized coefficients, row-major");
  verify->add_option("--quant", vb.quant_path,
                     "Quantization table file (whitespace-separated steps)");
  verify->add_option("--budget-nodes", vb.budget_nodes,
                     "Node budget (0 = unlimited)");
  verify->add_option("--budget-seconds", vb.budget_seconds,
                     "Time budget in seconds (0 = unlimited)");
  verify->add_option("--eps", vb.eps, "Strict-inequality margin");
  verify->add_flag("--brute-force", vb.brute,
                   "Also run the exhaustive reference search");
  verify->add_flag("--list-antecedents", vb.list_all,
                   "Enumerate every antecedent (small shapes only)");

  std::string shape_text = "8x8", quant_path, input_dir, out_path;
  std::uint64_t seed = 0;
  int samples = 0, max_changes = 6, image_size = 256, smoothness = 2;
  double payload = 0.0, eps = kDefaultEps;
  std::vector<std::uint64_t> budget_nodes;
  std::vector<double> budget_seconds;

  auto add_common = [&](CLI::App *cmd, bool needs_payload) {
    cmd->add_option("--shape", shape_text, "Block shape, e.g. 6x6");
    cmd->add_option("--quant", quant_path, "Quantization table file");
    cmd->add_option("--seed", seed, "Root seed for all derived streams")
        ->required();
    cmd->add_option("--samples", samples,
                    "Blocks per point (incompat-rate) or image count")
        ->required();
    cmd->add_option("--input-dir", input_dir,
                    "Directory of .pgm cover images (default: synthetic)");
    cmd->add_option("--image-size", image_size, "Synthetic image side length");
    cmd->add_option("--smoothness", smoothness,
                    "Synthetic blur passes (0 = raw noise)");
    cmd->add_option("--eps", eps, "Strict-inequality margin");
    cmd->add_option("--out", out_path, "Output CSV path (JSON written too)")
        ->required();
    if (needs_payload)
      cmd->add_option("--payload", payload,
                      "Bits per nonzero AC coefficient")
          ->required();
  };

  CLI::App *rate = app.add_subcommand(
      "incompat-rate",
      "Incompatibility rate vs number of +-1 changes per block");
  add_common(rate, false);
  rate->add_option("--max-changes", max_changes,
                   "Largest number of changes per block");

  CLI::App *detect = app.add_subcommand(
      "payload-detect", "Per-image detection at a fixed embedding payload");
  add_common(detect, true);

  CLI::App *timing = app.add_subcommand(
      "timing", "Detection error vs solver budget on cover/stego pairs");
  add_common(timing, true);
  timing->add_option("--budget-nodes", budget_nodes,
                     "Ascending node budgets (deterministic)")
      ->delimiter(',');
  timing->add_option("--budget-seconds", budget_seconds,
                     "Ascending time budgets in seconds")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (verify->parsed())
      return cmd_verify_block(vb);

    ExperimentConfig cfg{parse_shape(shape_text)};
    cfg.quant = quant_path.empty() ? quant_table_qf100(cfg.shape)
                                   : load_quant(quant_path, cfg.shape);
    cfg.seed = seed;
    cfg.samples = samples;
    cfg.max_changes = max_changes;
    cfg.payload = payload;
    cfg.input_dir = input_dir;
    cfg.image_size = image_size;
    cfg.smoothness = smoothness;
    cfg.node_budgets = budget_nodes;
    cfg.second_budgets = budget_seconds;
    cfg.eps = eps;

    if (rate->parsed()) {
      write_table(run_incompat_rate(cfg), out_path);
    } else if (detect->parsed()) {
      write_table(run_payload_detect(cfg), out_path);
    } else if (timing->parsed()) {
      TimingResult r = run_timing(cfg);
      write_table(r.curve, out_path);
      write_table(r.ratios, ratios_path(out_path));
    }
    return 0;
  } catch (const std::invalid_argument &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const EnumerationCapError &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const IoError &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
