#pragma once

#include "jcompat/codec.hpp"
#include "jcompat/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jcompat {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels; // row-major, height * width

  GrayImage() = default;
  GrayImage(int w, int h);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t &at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Binary PGM (P5), maxval 255 only. Throws IoError on anything else.
GrayImage load_pgm(const std::string &path);
void save_pgm(const GrayImage &img, const std::string &path);

// Seeded grayscale test image. smoothness 0 is raw uniform noise; higher
// values run that many 3x3 binomial blur passes over the noise, add a random
// linear gradient and stretch the result back to [0, 255], giving mostly
// smooth content with full dynamic range.
GrayImage gen_synthetic(std::uint64_t seed, int width, int height,
                        int smoothness);

// Cuts the image into shape-sized blocks in row-major order, cropping bottom
// and right remainders that do not fill a block.
std::vector<PixelBlock> split_blocks(const GrayImage &img, BlockShape shape);

} // namespace jcompat
