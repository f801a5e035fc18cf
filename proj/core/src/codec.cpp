#include "jcompat/codec.hpp"

#include <algorithm>

namespace jcompat {

PixelBlock::PixelBlock(BlockShape s, std::vector<int> v)
    : shape(s), values(std::move(v)) {
  if (static_cast<int>(values.size()) != shape.size())
    throw std::invalid_argument("PixelBlock: wrong number of values");
  for (int p : values)
    if (p < 0 || p > 255)
      throw std::invalid_argument("PixelBlock: value outside [0, 255]");
}

DctBlock::DctBlock(BlockShape s, std::vector<int> c, QuantTable q)
    : shape(s), coeffs(std::move(c)), quant(std::move(q)) {
  if (static_cast<int>(coeffs.size()) != shape.size())
    throw std::invalid_argument("DctBlock: wrong number of coefficients");
  if (!(quant.shape() == shape))
    throw std::invalid_argument("DctBlock: quant table shape mismatch");
}

CompressResult compress(const PixelBlock &x, const QuantTable &q,
                        const DctMatrix &m) {
  if (!(x.shape == q.shape()) || !(x.shape == m.shape()))
    throw std::invalid_argument("compress: shape mismatch");
  int nm = x.shape.size();
  std::vector<double> shifted(nm), d(nm);
  for (int i = 0; i < nm; ++i)
    shifted[i] = x.values[i] - kLevelShift;
  m.forward(shifted, d);

  std::vector<int> c(nm);
  std::vector<double> u(nm);
  for (int i = 0; i < nm; ++i) {
    double t = d[i] / q.at(i);
    c[i] = round_half_away(t);
    u[i] = c[i] - t;
  }
  return {DctBlock(x.shape, std::move(c), q), DctError{std::move(u)}};
}

DecompResult decompress(const DctBlock &c, const DctMatrix &m) {
  if (!(c.shape == m.shape()))
    throw std::invalid_argument("decompress: shape mismatch");
  int nm = c.shape.size();
  std::vector<double> deq(nm);
  for (int i = 0; i < nm; ++i)
    deq[i] = static_cast<double>(c.coeffs[i]) * c.quant.at(i);

  DecompResult r;
  r.y.resize(nm);
  m.inverse(deq, r.y);
  r.rounded.resize(nm);
  r.e.resize(nm);
  for (int i = 0; i < nm; ++i) {
    r.y[i] += kLevelShift;
    r.rounded[i] = round_half_away(r.y[i]);
    r.e[i] = r.rounded[i] - r.y[i];
    if (r.rounded[i] < 0 || r.rounded[i] > 255)
      r.clipped = true;
  }
  return r;
}

bool roundtrip_check(const PixelBlock &x, const QuantTable &q,
                     const DctMatrix &m) {
  CompressResult first = compress(x, q, m);
  DecompResult dec = decompress(first.block, m);
  std::vector<int> clamped(dec.rounded.size());
  for (std::size_t i = 0; i < clamped.size(); ++i)
    clamped[i] = std::clamp(dec.rounded[i], 0, 255);
  CompressResult second = compress(PixelBlock(x.shape, std::move(clamped)), q, m);
  return first.block.coeffs == second.block.coeffs;
}

} // namespace jcompat
