#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace jcompat {

// Dimensions of a rectangular pixel block. Vectors over a block are flattened
// row-major: entry (i, j) lives at index i * cols + j. Frequency vectors use
// the same layout, so the DC coefficient of a DCT block is always index 0.
struct BlockShape {
  int rows;
  int cols;

  BlockShape(int n, int m) : rows(n), cols(m) {
    if (n < 1 || m < 1)
      throw std::invalid_argument("BlockShape: dimensions must be positive");
  }

  int size() const { return rows * cols; }

  friend bool operator==(const BlockShape &, const BlockShape &) = default;
};

// Nearest integer with halves rounded away from zero: 0.5 -> 1, -0.5 -> -1.
// This matches the rounding used when integer pixel values are recovered
// after the inverse transform. Throws on NaN/inf.
int round_half_away(double v);

// Orthonormal 2D DCT-II for an n x m block, stored as a dense nm x nm matrix
// acting on flattened blocks. Row f of the matrix is the basis function for
// frequency f; the inverse transform is the transpose.
class DctMatrix {
public:
  explicit DctMatrix(BlockShape shape);

  const BlockShape &shape() const { return shape_; }
  int size() const { return shape_.size(); }

  double at(int freq, int pixel) const {
    return entries_[static_cast<std::size_t>(freq) * size() + pixel];
  }
  std::span<const double> row(int freq) const {
    return {entries_.data() + static_cast<std::size_t>(freq) * size(),
            static_cast<std::size_t>(size())};
  }

  // freq = M * spatial. Both spans must have length size().
  void forward(std::span<const double> spatial, std::span<double> freq) const;
  // spatial = M^T * freq.
  void inverse(std::span<const double> freq, std::span<double> spatial) const;

private:
  BlockShape shape_;
  std::vector<double> entries_;
};

DctMatrix dct_matrix(BlockShape shape);

// Per-frequency quantization steps, flattened like everything else.
class QuantTable {
public:
  QuantTable(BlockShape shape, std::vector<int> steps);

  const BlockShape &shape() const { return shape_; }
  int size() const { return shape_.size(); }
  int at(int freq) const { return steps_[freq]; }
  std::span<const int> steps() const { return steps_; }

  friend bool operator==(const QuantTable &, const QuantTable &) = default;

private:
  BlockShape shape_;
  std::vector<int> steps_;
};

// All-ones table (the finest quantization a JPEG-style pipeline can ask for).
QuantTable quant_table_qf100(BlockShape shape);

} // namespace jcompat
