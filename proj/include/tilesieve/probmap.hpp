#pragma once

#include "tilesieve/image.hpp"
#include "tilesieve/tiler.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace tilesieve {

struct ProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> prob;         // meaningful only where coverage >= 1
  std::vector<std::uint32_t> coverage;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  bool covered(int x, int y) const { return coverage[index(x, y)] > 0; }
};

// Per-pixel mean probability of the kept tiles covering each pixel, summed in
// tile-list order. Discarded tiles are ignored. Throws UsageError when a kept
// tile lacks a probability or leaves the image.
ProbabilityMap accumulate(int width, int height, const std::vector<TileRecord> &tiles);

enum class Band { red, gold, green, blue };

// red p >= 0.65, gold 0.5 <= p < 0.65, green 0.35 < p < 0.5, blue p <= 0.35.
Band bucket(double p);
std::string_view band_name(Band band);

using Rgb = std::array<std::uint8_t, 3>;
Rgb band_color(Band band);
inline constexpr Rgb kUnexaminedGray = {128, 128, 128};
inline constexpr double kDefaultOverlayAlpha = 0.55;

// Colors covered pixels by band and uncovered pixels gray. With a source image,
// each channel is alpha * color + (1 - alpha) * source, rounded half-up.
ImageBuffer render(const ProbabilityMap &map, const ImageBuffer *source, double alpha);

// Tab-separated `x y coverage prob` rows for covered pixels.
void write_raw_map(std::ostream &out, const ProbabilityMap &map);
// Sidecar legend describing the color bands.
void write_legend(std::ostream &out);

} // namespace tilesieve
