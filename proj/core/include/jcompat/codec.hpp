#pragma once

#include "jcompat/transform.hpp"

#include <vector>

namespace jcompat {

// Level shift applied to pixels before the forward transform.
inline constexpr int kLevelShift = 128;

// Integer pixel block with values in [0, 255].
struct PixelBlock {
  BlockShape shape;
  std::vector<int> values;

  PixelBlock(BlockShape s, std::vector<int> v);
};

// Quantized DCT coefficients of one block together with the table that
// produced them.
struct DctBlock {
  BlockShape shape;
  std::vector<int> coeffs;
  QuantTable quant;

  DctBlock(BlockShape s, std::vector<int> c, QuantTable q);

  friend bool operator==(const DctBlock &, const DctBlock &) = default;
};

// Quantization error of one compression: u = c - d/q per frequency, where d
// is the unquantized coefficient. Always in [-1/2, 1/2].
struct DctError {
  std::vector<double> u;
};

struct CompressResult {
  DctBlock block;
  DctError error;
};

// Decompressed block before and after integer rounding. `rounded` is kept
// unclamped; `clipped` flags values outside [0, 255]. The rounding error
// e = rounded - y is always in [-1/2, 1/2].
struct DecompResult {
  std::vector<double> y;
  std::vector<int> rounded;
  std::vector<double> e;
  bool clipped = false;
};

// d = M (x - 128), c = [d / q] with halves away from zero.
CompressResult compress(const PixelBlock &x, const QuantTable &q,
                        const DctMatrix &m);

// y = M^T (c * q) + 128, rounded to nearest integers.
DecompResult decompress(const DctBlock &c, const DctMatrix &m);

// True when compressing x, decompressing (with clamping to [0, 255]) and
// compressing again reproduces the same coefficients.
bool roundtrip_check(const PixelBlock &x, const QuantTable &q,
                     const DctMatrix &m);

} // namespace jcompat
