#include "tilesieve/tiler.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/imaging.hpp"
#include "tilesieve/parallel.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

namespace tilesieve {

void TileSpec::validate() const {
  if (size < 8) {
    throw UsageError("tile size must be at least 8, got " + std::to_string(size));
  }
  if (stride < 1 || stride > size) {
    throw UsageError("tile stride must lie in [1, size=" + std::to_string(size) +
                     "], got " + std::to_string(stride));
  }
}

TileSpec TileSpec::with_default_stride(int size) {
  return TileSpec{size, std::max(1, size / 2)};
}

int tiles_along(int dim, int size, int stride) {
  if (dim < size) return 0;
  return (dim - size) / stride + 1;
}

std::vector<TileRecord> grid_tiles(const ImageBuffer &img, const TileSpec &spec) {
  spec.validate();
  const int nx = tiles_along(img.width(), spec.size, spec.stride);
  const int ny = tiles_along(img.height(), spec.size, spec.stride);
  if (nx == 0 || ny == 0) {
    throw DataError("image " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + " is smaller than tile size " +
                    std::to_string(spec.size) + ": no tiles");
  }
  std::vector<TileRecord> tiles;
  tiles.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      TileRecord t;
      t.x = i * spec.stride;
      t.y = j * spec.stride;
      t.size = spec.size;
      tiles.push_back(t);
    }
  }
  return tiles;
}

std::vector<TileRecord> sieve(const ImageBuffer &luma, std::vector<TileRecord> tiles) {
  const double threshold = image_entropy(luma);
  return sieve(luma, std::move(tiles), threshold);
}

std::vector<TileRecord> sieve(const ImageBuffer &luma, std::vector<TileRecord> tiles,
                              double threshold) {
  if (luma.channels() != 1) {
    throw UsageError("sieve expects a single-channel (luma) image");
  }
  parallel_for(tiles.size(), [&](std::size_t i) {
    TileRecord &t = tiles[i];
    t.entropy = shannon_entropy(histogram(luma, t.rect()));
    t.kept = t.entropy >= threshold;
  });
  return tiles;
}

double coverage_fraction(const std::vector<TileRecord> &tiles) {
  if (tiles.empty()) {
    throw UsageError("coverage fraction of an empty tile list");
  }
  const auto kept = std::count_if(tiles.begin(), tiles.end(),
                                  [](const TileRecord &t) { return t.kept; });
  return static_cast<double>(kept) / static_cast<double>(tiles.size());
}

void write_tile_manifest(std::ostream &out, const std::vector<TileRecord> &tiles) {
  out << "# x\ty\tsize\tentropy\tkept\n";
  out << std::fixed << std::setprecision(6);
  for (const auto &t : tiles) {
    out << t.x << '\t' << t.y << '\t' << t.size << '\t' << t.entropy << '\t'
        << (t.kept ? 1 : 0) << '\n';
  }
}

} // namespace tilesieve
