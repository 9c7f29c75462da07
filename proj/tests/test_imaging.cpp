#include "test_support.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/image_io.hpp"
#include "tilesieve/imaging.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

using namespace tilesieve;
using tilesieve::testing::TempDir;
using tilesieve::testing::what_of;

namespace {

// Written with Python's zlib/struct, independent of the encoder under test.
const std::vector<std::uint8_t> kGray1x1 = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x77, 0xcd, 0x72, 0xb6, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
// 2x1 16-bit gray: 0x1234, 0xabcd.
const std::vector<std::uint8_t> kGray16 = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x10, 0x00, 0x00, 0x00, 0x00, 0x81, 0xd9, 0xfc, 0x15, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x10, 0x32, 0x59, 0x7d, 0x16, 0x00, 0x03, 0x0c, 0x01, 0xbf, 0x6e, 0xb9, 0xc6, 0x5d, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
// 2x2 RGB, row 0 Sub-filtered, row 1 Up-filtered.
const std::vector<std::uint8_t> kRgbFiltered = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0xfd, 0xd4, 0x9a, 0x73, 0x00, 0x00, 0x00, 0x14, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe4, 0x12, 0x91, 0x03, 0x02, 0x26, 0x46, 0x26, 0x66, 0x16, 0x56, 0x36, 0x00, 0x06, 0x48, 0x00, 0xaf, 0x70, 0x80, 0x39, 0x92, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const std::vector<std::uint8_t> kRgba = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1f, 0x15, 0xc4, 0x89, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x64, 0x62, 0x66, 0x01, 0x00, 0x00, 0x19, 0x00, 0x0b, 0xe7, 0x5a, 0x46, 0xa4, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const std::vector<std::uint8_t> kInterlaced = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x01, 0x4d, 0x79, 0xab, 0xc3, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x77, 0xcd, 0x72, 0xb6, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

// Entropy straight from pixel counts, bypassing Histogram.
double entropy_oracle(std::span<const std::uint8_t> pixels) {
  std::map<int, double> counts;
  for (const auto v : pixels) counts[v] += 1.0;
  double h = 0.0;
  for (const auto &[value, count] : counts) {
    const double p = count / static_cast<double>(pixels.size());
    h -= p * std::log2(p);
  }
  return h;
}

void write_bytes(const std::filesystem::path &path, const std::string &bytes) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(bytes.data()),
                                   bytes.size()));
}

} // namespace

TEST_CASE("load_image decodes a hand-written 2x2 PPM") {
  TempDir dir;
  const std::string header = "P6\n# comment\n2 2\n255\n";
  std::string raster = {0, 0, 0, '\xff', '\xff', '\xff', 0, 0, 0, '\xff', '\xff', '\xff'};
  write_bytes(dir / "a.ppm", header + raster);
  const ImageBuffer img = load_image(dir / "a.ppm");
  CHECK(img.width() == 2);
  CHECK(img.height() == 2);
  CHECK(img.channels() == 3);
  CHECK(img.at(0, 0, 0) == 0);
  CHECK(img.at(1, 0, 2) == 255);
  CHECK(img.at(0, 1, 1) == 0);
  CHECK(img.at(1, 1, 0) == 255);
}

TEST_CASE("load_image decodes a 1x1 grayscale PNG") {
  TempDir dir;
  write_file_bytes(dir / "g.png", kGray1x1);
  const ImageBuffer img = load_image(dir / "g.png");
  CHECK(img == ImageBuffer(1, 1, 1, std::vector<std::uint8_t>{128}));
}

TEST_CASE("16-bit PNG samples keep the high byte") {
  const ImageBuffer img = decode_png(kGray16);
  REQUIRE(img.width() == 2);
  CHECK(img.at(0, 0) == 0x12);
  CHECK(img.at(1, 0) == 0xab);
}

TEST_CASE("PNG scanline filters are reversed") {
  const ImageBuffer img = decode_png(kRgbFiltered);
  const std::vector<std::uint8_t> expected = {10, 20, 30, 40, 50, 60, 11, 22, 33, 44, 55, 66};
  CHECK(std::equal(expected.begin(), expected.end(), img.data().begin()));
}

TEST_CASE("PNG with alpha or interlace is rejected explicitly") {
  CHECK(what_of([] { decode_png(kRgba); }).find("alpha") != std::string::npos);
  CHECK(what_of([] { decode_png(kInterlaced); }).find("interlaced") != std::string::npos);
}

TEST_CASE("truncated and foreign files are errors") {
  TempDir dir;
  auto truncated = kGray1x1;
  truncated.resize(40);
  write_file_bytes(dir / "t.png", truncated);
  CHECK(what_of([&] { load_image(dir / "t.png"); }).find("unreadable") != std::string::npos);
  CHECK_THROWS_AS(load_image(dir / "t.png"), DataError);

  write_bytes(dir / "t.ppm", "P6\n4 4\n255\nabc");
  CHECK(what_of([&] { load_image(dir / "t.ppm"); }).find("unreadable") != std::string::npos);

  write_bytes(dir / "x.gif", "GIF89a....");
  CHECK(what_of([&] { load_image(dir / "x.gif"); }).find("unsupported") != std::string::npos);

  CHECK_THROWS_AS(load_image(dir / "missing.png"), DataError);
}

TEST_CASE("oversized headers report dimension overflow") {
  const std::string header = "P5\n4000000000 4000000000\n255\n";
  const std::vector<std::uint8_t> bytes(header.begin(), header.end());
  CHECK(what_of([&] { decode_pnm(bytes); }).find("overflow") != std::string::npos);
}

TEST_CASE("PNG and PNM encoders round-trip through the decoders") {
  Rng rng(7);
  for (const int channels : {1, 3}) {
    const ImageBuffer img = testing::random_image(rng, 17, 9, channels);
    CHECK(decode_png(encode_png(img)) == img);
    CHECK(decode_pnm(encode_pnm(img)) == img);
  }
}

TEST_CASE("to_luma") {
  SUBCASE("single channel is returned bit-identical") {
    Rng rng(3);
    const ImageBuffer g = testing::random_image(rng, 5, 4, 1);
    CHECK(to_luma(g) == g);
  }
  SUBCASE("white stays 255 and pure red is 76") {
    ImageBuffer img(2, 1, 3, std::vector<std::uint8_t>{255, 255, 255, 255, 0, 0});
    const ImageBuffer l = to_luma(img);
    CHECK(l.at(0, 0) == 255);
    CHECK(l.at(1, 0) == static_cast<int>(std::floor(0.299 * 255 + 0.5)));
    CHECK(l.at(1, 0) == 76);
  }
  SUBCASE("idempotent") {
    Rng rng(11);
    const ImageBuffer once = to_luma(testing::random_image(rng, 13, 7, 3));
    CHECK(to_luma(once) == once);
  }
}

TEST_CASE("histogram") {
  SUBCASE("constant region") {
    const ImageBuffer img = testing::constant_image(20, 20, 1, 128);
    const Histogram h = histogram(img, Rect{3, 4, 10, 10});
    CHECK(h.total == 100);
    CHECK(h.bins[128] == 100);
    std::uint64_t others = 0;
    for (int v = 0; v < 256; ++v) others += v == 128 ? 0 : h.bins[v];
    CHECK(others == 0);
  }
  SUBCASE("every value once") {
    ImageBuffer img(16, 16, 1);
    for (int i = 0; i < 256; ++i) img.data()[i] = static_cast<std::uint8_t>(i);
    const Histogram h = histogram(img);
    for (const auto b : h.bins) CHECK(b == 1);
  }
  SUBCASE("zero-area and out-of-bounds regions are rejected") {
    const ImageBuffer img = testing::constant_image(8, 8, 1, 0);
    CHECK_THROWS_AS(histogram(img, Rect{0, 0, 0, 4}), UsageError);
    CHECK_THROWS_AS(histogram(img, Rect{4, 4, 5, 1}), UsageError);
    CHECK_THROWS_AS(histogram(testing::constant_image(8, 8, 3, 0)), UsageError);
  }
  SUBCASE("partition histograms sum to the whole") {
    Rng rng(19);
    for (int trial = 0; trial < 20; ++trial) {
      const int w = 2 + static_cast<int>(rng.below(30));
      const int h = 2 + static_cast<int>(rng.below(30));
      const ImageBuffer img = testing::random_image(rng, w, h, 1);
      const int cx = 1 + static_cast<int>(rng.below(w - 1));
      const int cy = 1 + static_cast<int>(rng.below(h - 1));
      Histogram sum = histogram(img, Rect{0, 0, cx, cy});
      sum += histogram(img, Rect{cx, 0, w - cx, cy});
      sum += histogram(img, Rect{0, cy, cx, h - cy});
      sum += histogram(img, Rect{cx, cy, w - cx, h - cy});
      CHECK(sum == histogram(img));
    }
  }
}

TEST_CASE("shannon_entropy") {
  Histogram constant;
  constant.bins[42] = 1000;
  constant.total = 1000;
  CHECK(shannon_entropy(constant) == 0.0);

  Histogram two;
  two.bins[0] = 5;
  two.bins[255] = 5;
  two.total = 10;
  CHECK(shannon_entropy(two) == doctest::Approx(1.0).epsilon(1e-15));

  Histogram uniform;
  for (auto &b : uniform.bins) b = 3;
  uniform.total = 768;
  CHECK(std::abs(shannon_entropy(uniform) - 8.0) < 1e-12);

  CHECK_THROWS_AS(shannon_entropy(Histogram{}), UsageError);
}

TEST_CASE("entropy matches a pixel-count oracle and stays within [0, 8]") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int levels = 1 + static_cast<int>(rng.below(256));
    const ImageBuffer img = testing::random_image(rng, 1 + static_cast<int>(rng.below(40)),
                                                  1 + static_cast<int>(rng.below(40)), 1, levels);
    const double h = image_entropy(img);
    CHECK(h >= 0.0);
    CHECK(h <= 8.0);
    CHECK(h == doctest::Approx(entropy_oracle(img.data())).epsilon(1e-12));
  }
}

TEST_CASE("entropy is invariant to pixel permutation") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    ImageBuffer img = testing::random_image(rng, 24, 16, 1, 1 + static_cast<int>(rng.below(256)));
    const double before = image_entropy(img);
    auto data = img.data();
    for (std::size_t i = data.size(); i > 1; --i) std::swap(data[i - 1], data[rng.below(i)]);
    CHECK(image_entropy(img) == before);
  }
}
