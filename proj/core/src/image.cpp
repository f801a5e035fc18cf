#include "jcompat/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace jcompat {

GrayImage::GrayImage(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1)
    throw std::invalid_argument("GrayImage: dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * h, 0);
}

namespace {

// Reads the next whitespace-delimited PGM header token, skipping # comments.
std::string next_token(std::istream &in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n')
        ;
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty())
        return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_header_int(std::istream &in, const std::string &what) {
  std::string tok = next_token(in);
  if (tok.empty())
    throw IoError("pgm: missing " + what);
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size())
      throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception &) {
    throw IoError("pgm: bad " + what + " '" + tok + "'");
  }
}

} // namespace

GrayImage load_pgm(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("pgm: cannot open " + path);
  std::string magic = next_token(in);
  if (magic != "P5")
    throw IoError("pgm: " + path + " is not binary PGM (P5)");
  int width = parse_header_int(in, "width");
  int height = parse_header_int(in, "height");
  int maxval = parse_header_int(in, "maxval");
  if (width < 1 || height < 1)
    throw IoError("pgm: bad dimensions in " + path);
  if (maxval != 255)
    throw IoError("pgm: only maxval 255 supported, got " +
                  std::to_string(maxval));
  // The header ends with exactly one whitespace byte before the raster.
  GrayImage img(width, height);
  in.read(reinterpret_cast<char *>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw IoError("pgm: truncated raster in " + path);
  return img;
}

void save_pgm(const GrayImage &img, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("pgm: cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char *>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out)
    throw IoError("pgm: write failed for " + path);
}

GrayImage gen_synthetic(std::uint64_t seed, int width, int height,
                        int smoothness) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("gen_synthetic: dimensions must be positive");
  if (smoothness < 0)
    throw std::invalid_argument("gen_synthetic: smoothness must be >= 0");

  Rng rng(seed);
  GrayImage img(width, height);

  if (smoothness == 0) {
    for (auto &p : img.pixels)
      p = static_cast<std::uint8_t>(rng.below(256));
    return img;
  }

  std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<double> field(count);
  for (auto &v : field)
    v = rng.unit() * 255.0;

  // Separable [1 2 1]/4 blur with replicated edges, `smoothness` times.
  std::vector<double> tmp(count);
  auto idx = [width](int x, int y) {
    return static_cast<std::size_t>(y) * width + x;
  };
  for (int pass = 0; pass < smoothness; ++pass) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        int xl = std::max(x - 1, 0), xr = std::min(x + 1, width - 1);
        tmp[idx(x, y)] =
            0.25 * (field[idx(xl, y)] + 2.0 * field[idx(x, y)] +
                    field[idx(xr, y)]);
      }
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        int yt = std::max(y - 1, 0), yb = std::min(y + 1, height - 1);
        field[idx(x, y)] =
            0.25 * (tmp[idx(x, yt)] + 2.0 * tmp[idx(x, y)] + tmp[idx(x, yb)]);
      }
  }

  // Random linear gradient keeps large-scale structure after the blur has
  // flattened the noise.
  double gx = (rng.unit() - 0.5) * 0.5 * 255.0 / std::max(width - 1, 1);
  double gy = (rng.unit() - 0.5) * 0.5 * 255.0 / std::max(height - 1, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      field[idx(x, y)] += gx * x + gy * y;

  double lo = field[0], hi = field[0];
  for (double v : field) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi - lo;
  for (std::size_t i = 0; i < count; ++i) {
    double v = span > 0 ? (field[i] - lo) / span * 255.0 : 128.0;
    img.pixels[i] = static_cast<std::uint8_t>(
        std::clamp<long>(std::lround(v), 0, 255));
  }
  return img;
}

std::vector<PixelBlock> split_blocks(const GrayImage &img, BlockShape shape) {
  int by = img.height / shape.rows;
  int bx = img.width / shape.cols;
  std::vector<PixelBlock> out;
  out.reserve(static_cast<std::size_t>(by) * bx);
  for (int yb = 0; yb < by; ++yb)
    for (int xb = 0; xb < bx; ++xb) {
      std::vector<int> vals(shape.size());
      for (int r = 0; r < shape.rows; ++r)
        for (int c = 0; c < shape.cols; ++c)
          vals[r * shape.cols + c] =
              img.at(xb * shape.cols + c, yb * shape.rows + r);
      out.emplace_back(shape, std::move(vals));
    }
  return out;
}

} // namespace jcompat
