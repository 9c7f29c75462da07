#pragma once

#include "tilesieve/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tilesieve {

// Texture style standing in for an artist's brushwork: oriented rectangular
// strokes drawn from a palette over the first palette color, plus noise.
struct StyleParams {
  double stroke_orientation = 0.0; // degrees, 0 = horizontal
  double orientation_jitter = 10.0; // +/- degrees per stroke
  int stroke_length = 40;
  int stroke_width = 6;
  int stroke_count = 1500;
  std::vector<std::array<std::uint8_t, 3>> palette = {
      {120, 100, 80}, {200, 170, 120}, {60, 70, 90}, {170, 60, 50}, {230, 220, 190}};
  int noise_amplitude = 24; // uniform in [-a, a], shared across channels
  std::uint64_t seed = 1;

  void validate() const;
};

// Deterministic for equal params. Throws UsageError below 64x64.
ImageBuffer generate_painting(const StyleParams &style, int width, int height);

struct CorpusLayout {
  int train = 0;
  int val = 0;
  int test = 0;
};

// Per-class 60/20/20 split, rounded half-up for train and val.
CorpusLayout corpus_layout(int n_per_class);

// Writes n_per_class PNGs per style (A = positive, B = negative) and a
// manifest.tsv beside them; returns the manifest path.
std::filesystem::path generate_corpus(const StyleParams &style_a, const StyleParams &style_b,
                                      int n_per_class, int width, int height,
                                      const std::filesystem::path &out_dir);

} // namespace tilesieve
