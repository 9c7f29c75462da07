#include "tilesieve/gradcam.hpp"

#include "cnn_internal.hpp"
#include "tilesieve/error.hpp"

#include <algorithm>
#include <cmath>

namespace tilesieve {

std::vector<double> upsample_bilinear(std::span<const double> src, int src_size,
                                      int dst_size) {
  std::vector<double> out(static_cast<std::size_t>(dst_size) * dst_size);
  const double scale = static_cast<double>(src_size) / dst_size;
  auto coord = [&](int d, int &i0, int &i1, double &frac) {
    const double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, src_size - 1.0);
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, src_size - 1);
    frac = s - i0;
  };
  for (int y = 0; y < dst_size; ++y) {
    int y0, y1;
    double fy;
    coord(y, y0, y1, fy);
    for (int x = 0; x < dst_size; ++x) {
      int x0, x1;
      double fx;
      coord(x, x0, x1, fx);
      const double top = src[y0 * src_size + x0] * (1 - fx) + src[y0 * src_size + x1] * fx;
      const double bottom = src[y1 * src_size + x0] * (1 - fx) + src[y1 * src_size + x1] * fx;
      out[static_cast<std::size_t>(y) * dst_size + x] = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

HeatMap gradcam(const CnnModel &model, std::span<const float> tile) {
  const NetworkShape &shape = model.shape();
  if (shape.stages.empty()) {
    throw UsageError("Grad-CAM needs a model with at least one conv layer");
  }
  const auto pass = detail::run_forward(model, tile);
  std::vector<double> d_act;
  detail::run_backward(model, pass, 1.0, {}, &d_act);

  const StageGeometry &g = shape.stages.back();
  const std::vector<double> &act = pass.stages.back().conv;
  const std::size_t plane = static_cast<std::size_t>(g.conv_size) * g.conv_size;
  std::vector<double> cam(plane, 0.0);
  for (int f = 0; f < g.filters; ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += d_act[f * plane + i];
    mean /= static_cast<double>(plane);
    if (mean == 0.0) continue;
    for (std::size_t i = 0; i < plane; ++i) cam[i] += mean * act[f * plane + i];
  }
  for (double &v : cam) v = std::max(0.0, v);

  HeatMap map;
  map.size = model.config().input_size;
  map.values = upsample_bilinear(cam, g.conv_size, map.size);
  const double peak = *std::max_element(map.values.begin(), map.values.end());
  if (peak > 0.0) {
    for (double &v : map.values) v /= peak;
  } else {
    std::fill(map.values.begin(), map.values.end(), 0.0);
  }
  return map;
}

ImageBuffer render_heatmap(const HeatMap &map, const ImageBuffer *tile, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must lie in [0, 1]");
  if (tile != nullptr && (tile->width() != map.size || tile->height() != map.size)) {
    throw UsageError("heat map and tile dimensions differ");
  }
  ImageBuffer out(map.size, map.size, 3);
  for (int y = 0; y < map.size; ++y) {
    for (int x = 0; x < map.size; ++x) {
      const double v = std::clamp(map.at(x, y), 0.0, 1.0);
      const double rgb[3] = {std::clamp(1.5 - std::abs(4 * v - 3), 0.0, 1.0),
                             std::clamp(1.5 - std::abs(4 * v - 2), 0.0, 1.0),
                             std::clamp(1.5 - std::abs(4 * v - 1), 0.0, 1.0)};
      for (int c = 0; c < 3; ++c) {
        double value = 255.0 * rgb[c];
        if (tile != nullptr) {
          const int src_c = tile->channels() == 3 ? c : 0;
          value = alpha * value + (1.0 - alpha) * tile->at(x, y, src_c);
        }
        out.at(x, y, c) = static_cast<std::uint8_t>(std::floor(value + 0.5));
      }
    }
  }
  return out;
}

} // namespace tilesieve
