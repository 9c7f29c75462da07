#pragma once

#include "tilesieve/cnn.hpp"
#include "tilesieve/image.hpp"

#include <span>
#include <vector>

namespace tilesieve {

// Square map of reals in [0, 1], row-major.
struct HeatMap {
  int size = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * size + x]; }
};

// Gradient-weighted class activation map of the pre-sigmoid score over the
// last conv stage, upsampled to the tile size and normalized by its maximum.
// Throws UsageError for models without conv stages.
HeatMap gradcam(const CnnModel &model, std::span<const float> tile);

// Bilinear resize of a square map with half-pixel centers and edge clamping.
std::vector<double> upsample_bilinear(std::span<const double> src, int src_size,
                                      int dst_size);

// Jet-style color rendering, optionally blended over the tile image.
ImageBuffer render_heatmap(const HeatMap &map, const ImageBuffer *tile, double alpha);

} // namespace tilesieve
