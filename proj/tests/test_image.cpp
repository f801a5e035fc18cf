#include "jcompat/image.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <doctest.h>

using namespace jcompat;

namespace {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("jcompat_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string &name) const {
    return (path / name).string();
  }
};

void write_bytes(const std::string &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("PGM save and load round-trip the pixels") {
  TempDir dir;
  GrayImage img = gen_synthetic(5, 37, 23, 1);
  std::string path = dir.file("roundtrip.pgm");
  save_pgm(img, path);

  GrayImage back = load_pgm(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("PGM writer emits the canonical header") {
  TempDir dir;
  GrayImage img(3, 2);
  for (int i = 0; i < 6; ++i)
    img.pixels[i] = static_cast<std::uint8_t>(40 * i);
  std::string path = dir.file("header.pgm");
  save_pgm(img, path);

  std::ifstream in(path, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  CHECK(contents == std::string("P5\n3 2\n255\n") +
                        std::string("\x00\x28\x50\x78\xa0\xc8", 6));
}

TEST_CASE("PGM loader accepts comments and flexible whitespace") {
  TempDir dir;
  std::string path = dir.file("comments.pgm");
  write_bytes(path, "P5\n# a comment\n2 # widths\n2\n255\nabcd");
  GrayImage img = load_pgm(path);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{'a', 'b', 'c', 'd'});
}

TEST_CASE("PGM loader rejects malformed files") {
  TempDir dir;

  std::string not_p5 = dir.file("p6.pgm");
  write_bytes(not_p5, "P6\n2 2\n255\nabcdabcdabcd");
  CHECK_THROWS_AS(load_pgm(not_p5), IoError);

  std::string wide_maxval = dir.file("maxval.pgm");
  write_bytes(wide_maxval, "P5\n2 2\n65535\nabcdefgh");
  CHECK_THROWS_AS(load_pgm(wide_maxval), IoError);

  std::string truncated = dir.file("short.pgm");
  write_bytes(truncated, "P5\n2 2\n255\nab");
  CHECK_THROWS_AS(load_pgm(truncated), IoError);

  std::string bad_dims = dir.file("dims.pgm");
  write_bytes(bad_dims, "P5\n0 2\n255\n");
  CHECK_THROWS_AS(load_pgm(bad_dims), IoError);

  std::string no_tokens = dir.file("axed.pgm");
  write_bytes(no_tokens, "P5\n2");
  CHECK_THROWS_AS(load_pgm(no_tokens), IoError);

  CHECK_THROWS_AS(load_pgm(dir.file("missing.pgm")), IoError);
}

TEST_CASE("synthetic images are deterministic in the seed") {
  GrayImage a = gen_synthetic(77, 50, 40, 3);
  GrayImage b = gen_synthetic(77, 50, 40, 3);
  GrayImage c = gen_synthetic(78, 50, 40, 3);
  CHECK(a.pixels == b.pixels);
  CHECK(a.pixels != c.pixels);
  CHECK(a.width == 50);
  CHECK(a.height == 40);
  CHECK(a.pixels.size() == 50u * 40u);
}

TEST_CASE("synthetic images use the full dynamic range") {
  GrayImage img = gen_synthetic(11, 128, 128, 4);
  std::uint8_t lo = 255, hi = 0;
  for (std::uint8_t p : img.pixels) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  CHECK(lo == 0);
  CHECK(hi == 255);
}

TEST_CASE("synthetic generation validates its arguments") {
  CHECK_THROWS_AS(gen_synthetic(1, 0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(1, 10, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(1, 10, 10, -1), std::invalid_argument);
}

TEST_CASE("block splitting walks the image in row-major order") {
  GrayImage img(8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      img.at(x, y) = static_cast<std::uint8_t>(y * 8 + x);

  auto blocks = split_blocks(img, BlockShape(3, 4));
  REQUIRE(blocks.size() == 4);
  // Block 0 covers x in [0, 4), y in [0, 3).
  CHECK(blocks[0].values ==
        std::vector<int>{0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19});
  // Block 1 is the next block to the right.
  CHECK(blocks[1].values ==
        std::vector<int>{4, 5, 6, 7, 12, 13, 14, 15, 20, 21, 22, 23});
  // Block 2 starts the second block row.
  CHECK(blocks[2].values[0] == 24);
  CHECK(blocks[3].values[0] == 28);
}

TEST_CASE("block splitting crops partial blocks at the edges") {
  GrayImage img(10, 7);
  auto blocks = split_blocks(img, BlockShape(3, 4));
  CHECK(blocks.size() == 4);

  GrayImage exact(256, 256);
  CHECK(split_blocks(exact, BlockShape(6, 6)).size() == 42u * 42u);

  GrayImage tiny(2, 2);
  CHECK(split_blocks(tiny, BlockShape(3, 3)).empty());
}
