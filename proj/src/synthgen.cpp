#include "tilesieve/synthgen.hpp"

#include "tilesieve/dataset.hpp"
#include "tilesieve/error.hpp"
#include "tilesieve/image_io.hpp"
#include "tilesieve/parallel.hpp"
#include "tilesieve/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

namespace tilesieve {

namespace {

void draw_stroke(ImageBuffer &img, double cx, double cy, double angle_deg, double length,
                 double width, const std::array<std::uint8_t, 3> &color) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  const double half_l = length / 2.0;
  const double half_w = width / 2.0;
  const double reach = half_l + half_w;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double along = dx * ca + dy * sa;
      const double across = -dx * sa + dy * ca;
      if (std::abs(along) <= half_l && std::abs(across) <= half_w) {
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
      }
    }
  }
}

std::string painting_name(char prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%03d", prefix, index);
  return buf;
}

} // namespace

void StyleParams::validate() const {
  if (palette.empty()) throw UsageError("style palette must not be empty");
  if (noise_amplitude < 0 || noise_amplitude > 255) {
    throw UsageError("noise amplitude must lie in [0, 255]");
  }
  if (stroke_count < 0 || stroke_length < 1 || stroke_width < 1) {
    throw UsageError("stroke count must be >= 0 and stroke dimensions >= 1");
  }
}

ImageBuffer generate_painting(const StyleParams &style, int width, int height) {
  style.validate();
  if (width < 64 || height < 64) {
    throw UsageError("synthetic paintings must be at least 64x64, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  ImageBuffer img(width, height, 3);
  const auto &background = style.palette.front();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = background[c];
    }
  }
  Rng rng(style.seed);
  for (int s = 0; s < style.stroke_count; ++s) {
    const double cx = rng.uniform(0.0, width);
    const double cy = rng.uniform(0.0, height);
    const double angle = style.stroke_orientation +
                         rng.uniform(-style.orientation_jitter, style.orientation_jitter);
    const double length = style.stroke_length * rng.uniform(0.75, 1.25);
    const auto &color = style.palette[rng.below(style.palette.size())];
    draw_stroke(img, cx, cy, angle, length, style.stroke_width, color);
  }
  if (style.noise_amplitude > 0) {
    const auto span = static_cast<std::uint64_t>(2 * style.noise_amplitude + 1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const int n = static_cast<int>(rng.below(span)) - style.noise_amplitude;
        for (int c = 0; c < 3; ++c) {
          img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(img.at(x, y, c) + n, 0, 255));
        }
      }
    }
  }
  return img;
}

CorpusLayout corpus_layout(int n_per_class) {
  if (n_per_class < 4) {
    throw UsageError("a corpus needs at least 4 paintings per class");
  }
  CorpusLayout l;
  l.train = (6 * n_per_class + 5) / 10;
  l.val = (2 * n_per_class + 5) / 10;
  l.test = n_per_class - l.train - l.val;
  return l;
}

std::filesystem::path generate_corpus(const StyleParams &style_a, const StyleParams &style_b,
                                      int n_per_class, int width, int height,
                                      const std::filesystem::path &out_dir) {
  const CorpusLayout layout = corpus_layout(n_per_class);
  style_a.validate();
  style_b.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw DataError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());
  }

  std::vector<ManifestEntry> entries;
  std::vector<StyleParams> styles;
  for (int cls = 0; cls < 2; ++cls) {
    const StyleParams &base = cls == 0 ? style_a : style_b;
    const char prefix = cls == 0 ? 'A' : 'B';
    for (int i = 0; i < n_per_class; ++i) {
      StyleParams s = base;
      s.seed = mix_seed(base.seed, static_cast<std::uint64_t>(i));
      ManifestEntry e;
      e.painting_id = painting_name(prefix, i);
      e.path = out_dir / (e.painting_id + ".png");
      e.label = cls == 0 ? Label::positive : Label::negative;
      e.split = i < layout.train              ? Split::train
                : i < layout.train + layout.val ? Split::val
                                                : Split::test;
      entries.push_back(e);
      styles.push_back(s);
    }
  }
  parallel_for(entries.size(), [&](std::size_t i) {
    write_png(generate_painting(styles[i], width, height), entries[i].path);
  });

  const auto manifest = out_dir / "manifest.tsv";
  std::ofstream out(manifest);
  write_manifest(out, entries, out_dir);
  if (!out) throw DataError("cannot write manifest " + manifest.string());
  return manifest;
}

} // namespace tilesieve
