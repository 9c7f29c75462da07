#include "test_support.hpp"

#include "tilesieve/dataset.hpp"
#include "tilesieve/error.hpp"
#include "tilesieve/image_io.hpp"
#include "tilesieve/imaging.hpp"
#include "tilesieve/synthgen.hpp"

#include <doctest.h>

#include <cstdlib>
#include <map>

using namespace tilesieve;

namespace {

// Summed absolute luma differences along x and along y.
std::pair<double, double> directional_variation(const ImageBuffer &img) {
  const ImageBuffer luma = to_luma(img);
  double along_x = 0.0, along_y = 0.0;
  for (int y = 0; y + 1 < luma.height(); ++y) {
    for (int x = 0; x + 1 < luma.width(); ++x) {
      along_x += std::abs(luma.at(x + 1, y, 0) - luma.at(x, y, 0));
      along_y += std::abs(luma.at(x, y + 1, 0) - luma.at(x, y, 0));
    }
  }
  return {along_x, along_y};
}

} // namespace

TEST_CASE("equal parameters give identical paintings") {
  StyleParams s;
  s.seed = 5;
  s.stroke_count = 200;
  CHECK(generate_painting(s, 120, 90) == generate_painting(s, 120, 90));
  StyleParams t = s;
  t.seed = 6;
  CHECK_FALSE(generate_painting(s, 120, 90) == generate_painting(t, 120, 90));
}

TEST_CASE("no strokes and no noise give a flat canvas") {
  StyleParams s;
  s.stroke_count = 0;
  s.noise_amplitude = 0;
  const ImageBuffer img = generate_painting(s, 80, 64);
  CHECK(image_entropy(to_luma(img)) == 0.0);
  CHECK(img.at(10, 10, 0) == s.palette[0][0]);
}

TEST_CASE("stroke orientation shows up in the texture") {
  StyleParams horizontal;
  horizontal.noise_amplitude = 0;
  horizontal.stroke_count = 300;
  StyleParams vertical = horizontal;
  vertical.stroke_orientation = 90.0;
  const auto [hx, hy] = directional_variation(generate_painting(horizontal, 200, 200));
  const auto [vx, vy] = directional_variation(generate_painting(vertical, 200, 200));
  CHECK(hx < hy);
  CHECK(vy < vx);
}

TEST_CASE("invalid parameters") {
  StyleParams s;
  CHECK_THROWS_AS(generate_painting(s, 63, 200), UsageError);
  CHECK_THROWS_AS(generate_painting(s, 200, 10), UsageError);
  s.palette.clear();
  CHECK_THROWS_AS(generate_painting(s, 100, 100), UsageError);
  StyleParams loud;
  loud.noise_amplitude = 300;
  CHECK_THROWS_AS(generate_painting(loud, 100, 100), UsageError);
}

TEST_CASE("corpus layout") {
  const auto ten = corpus_layout(10);
  CHECK(ten.train == 6);
  CHECK(ten.val == 2);
  CHECK(ten.test == 2);
  const auto five = corpus_layout(5);
  CHECK(five.train + five.val + five.test == 5);
  CHECK(five.val >= 1);
  CHECK(five.test >= 1);
  CHECK_THROWS_AS(corpus_layout(3), UsageError);
}

TEST_CASE("generate_corpus writes images and a consistent manifest") {
  testing::TempDir a_dir, b_dir;
  StyleParams a, b;
  a.stroke_count = b.stroke_count = 60;
  b.stroke_orientation = 90.0;
  b.seed = 2;
  const auto manifest = generate_corpus(a, b, 10, 96, 80, a_dir.path());
  CHECK(manifest == a_dir / "manifest.tsv");
  const auto entries = read_manifest(manifest);
  REQUIRE(entries.size() == 20);
  std::map<Split, int> per_split;
  for (const auto &e : entries) {
    ++per_split[e.split];
    CHECK(std::filesystem::exists(e.path));
    CHECK(e.label == (e.painting_id[0] == 'A' ? Label::positive : Label::negative));
    CHECK(e.path.filename() == e.painting_id + ".png");
  }
  CHECK(per_split[Split::train] == 12);
  CHECK(per_split[Split::val] == 4);
  CHECK(per_split[Split::test] == 4);

  const auto img = load_image(entries.front().path);
  CHECK(img.width() == 96);
  CHECK(img.height() == 80);
  CHECK(img.channels() == 3);

  generate_corpus(a, b, 10, 96, 80, b_dir.path());
  for (const auto &e : entries) {
    CHECK(read_file_bytes(e.path) == read_file_bytes(b_dir / e.path.filename().string()));
  }
  CHECK(read_file_bytes(manifest) == read_file_bytes(b_dir / "manifest.tsv"));
}
