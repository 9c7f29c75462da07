#include "tilesieve/probmap.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace tilesieve {

ProbabilityMap accumulate(int width, int height, const std::vector<TileRecord> &tiles) {
  if (width < 1 || height < 1) throw UsageError("probability map needs positive dimensions");
  std::vector<const TileRecord *> kept;
  for (const auto &t : tiles) {
    if (!t.kept) continue;
    if (!t.probability) {
      throw UsageError("kept tile at (" + std::to_string(t.x) + "," + std::to_string(t.y) +
                       ") has no probability");
    }
    if (t.x < 0 || t.y < 0 || t.size < 1 || t.x + t.size > width || t.y + t.size > height) {
      throw UsageError("tile at (" + std::to_string(t.x) + "," + std::to_string(t.y) +
                       ") lies outside the " + std::to_string(width) + "x" +
                       std::to_string(height) + " map");
    }
    kept.push_back(&t);
  }

  ProbabilityMap map;
  map.width = width;
  map.height = height;
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  map.prob.assign(pixels, 0.0);
  map.coverage.assign(pixels, 0);
  // Each row is owned by one worker; tiles are visited in list order.
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    double *sum = map.prob.data() + row * width;
    std::uint32_t *count = map.coverage.data() + row * width;
    for (const TileRecord *t : kept) {
      if (y < t->y || y >= t->y + t->size) continue;
      const double p = *t->probability;
      for (int x = t->x; x < t->x + t->size; ++x) {
        sum[x] += p;
        ++count[x];
      }
    }
    for (int x = 0; x < width; ++x) {
      if (count[x] > 0) sum[x] /= count[x];
    }
  });
  return map;
}

Band bucket(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw UsageError("probability " + std::to_string(p) + " outside [0, 1]");
  }
  if (p >= 0.65) return Band::red;
  if (p >= 0.5) return Band::gold;
  if (p > 0.35) return Band::green;
  return Band::blue;
}

std::string_view band_name(Band band) {
  switch (band) {
  case Band::red: return "red";
  case Band::gold: return "gold";
  case Band::green: return "green";
  case Band::blue: return "blue";
  }
  return "?";
}

Rgb band_color(Band band) {
  switch (band) {
  case Band::red: return {200, 30, 30};
  case Band::gold: return {218, 165, 32};
  case Band::green: return {40, 160, 40};
  case Band::blue: return {30, 60, 200};
  }
  return kUnexaminedGray;
}

ImageBuffer render(const ProbabilityMap &map, const ImageBuffer *source, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  if (source != nullptr &&
      (source->width() != map.width || source->height() != map.height)) {
    throw UsageError("source image " + std::to_string(source->width()) + "x" +
                     std::to_string(source->height()) + " does not match map " +
                     std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  ImageBuffer out(map.width, map.height, 3);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const std::size_t i = map.index(x, y);
      const Rgb color = map.coverage[i] > 0 ? band_color(bucket(map.prob[i])) : kUnexaminedGray;
      for (int c = 0; c < 3; ++c) {
        if (source == nullptr) {
          out.at(x, y, c) = color[c];
          continue;
        }
        const double src = source->at(x, y, source->channels() == 3 ? c : 0);
        const double v = alpha * color[c] + (1.0 - alpha) * src;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
      }
    }
  }
  return out;
}

void write_raw_map(std::ostream &out, const ProbabilityMap &map) {
  out << "# x\ty\tcoverage\tprob\n";
  out << std::fixed << std::setprecision(6);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const std::size_t i = map.index(x, y);
      if (map.coverage[i] == 0) continue;
      out << x << '\t' << y << '\t' << map.coverage[i] << '\t' << map.prob[i] << '\n';
    }
  }
}

void write_legend(std::ostream &out) {
  out << "# band\trange\trgb\tmeaning\n";
  auto rgb = [](Rgb c) {
    return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
  };
  out << "red\tp >= 0.65\t" << rgb(band_color(Band::red)) << "\thigh likelihood, target artist\n";
  out << "gold\t0.5 <= p < 0.65\t" << rgb(band_color(Band::gold))
      << "\tmoderate likelihood, target artist\n";
  out << "green\t0.35 < p < 0.5\t" << rgb(band_color(Band::green))
      << "\tmoderate likelihood, other hand\n";
  out << "blue\tp <= 0.35\t" << rgb(band_color(Band::blue)) << "\thigh likelihood, other hand\n";
  out << "gray\tunexamined\t" << rgb(kUnexaminedGray)
      << "\tno kept tile covers this region (failed the entropy sieve)\n";
}

} // namespace tilesieve
