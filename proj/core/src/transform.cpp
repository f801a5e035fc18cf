#include "jcompat/transform.hpp"

#include <cmath>

namespace jcompat {

namespace {
constexpr double kPi = 3.14159265358979323846;

// 1D orthonormal DCT-II entry for frequency a, sample i, length n.
double dct1d(int a, int i, int n) {
  double scale = (a == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return scale * std::cos((2 * i + 1) * a * kPi / (2.0 * n));
}
} // namespace

int round_half_away(double v) {
  if (!std::isfinite(v))
    throw std::invalid_argument("round_half_away: value is not finite");
  return static_cast<int>(std::llround(v));
}

DctMatrix::DctMatrix(BlockShape shape) : shape_(shape) {
  int n = shape_.rows, m = shape_.cols, nm = shape_.size();
  entries_.resize(static_cast<std::size_t>(nm) * nm);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < m; ++b) {
      int f = a * m + b;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          entries_[static_cast<std::size_t>(f) * nm + i * m + j] =
              dct1d(a, i, n) * dct1d(b, j, m);
    }
}

void DctMatrix::forward(std::span<const double> spatial,
                        std::span<double> freq) const {
  int nm = size();
  for (int f = 0; f < nm; ++f) {
    const double *r = entries_.data() + static_cast<std::size_t>(f) * nm;
    double acc = 0.0;
    for (int p = 0; p < nm; ++p)
      acc += r[p] * spatial[p];
    freq[f] = acc;
  }
}

void DctMatrix::inverse(std::span<const double> freq,
                        std::span<double> spatial) const {
  int nm = size();
  for (int p = 0; p < nm; ++p)
    spatial[p] = 0.0;
  for (int f = 0; f < nm; ++f) {
    const double *r = entries_.data() + static_cast<std::size_t>(f) * nm;
    double cf = freq[f];
    for (int p = 0; p < nm; ++p)
      spatial[p] += r[p] * cf;
  }
}

DctMatrix dct_matrix(BlockShape shape) { return DctMatrix(shape); }

QuantTable::QuantTable(BlockShape shape, std::vector<int> steps)
    : shape_(shape), steps_(std::move(steps)) {
  if (static_cast<int>(steps_.size()) != shape_.size())
    throw std::invalid_argument("QuantTable: wrong number of steps");
  for (int s : steps_)
    if (s < 1)
      throw std::invalid_argument("QuantTable: steps must be >= 1");
}

QuantTable quant_table_qf100(BlockShape shape) {
  return QuantTable(shape, std::vector<int>(shape.size(), 1));
}

} // namespace jcompat
