#pragma once

#include "tilesieve/image.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace tilesieve {

// Square tile geometry: side length and the offset between tile origins.
struct TileSpec {
  int size = 100;
  int stride = 50;

  // Validates 8 <= size and 1 <= stride <= size; throws UsageError.
  void validate() const;
  // Half-tile stride, rounded down.
  static TileSpec with_default_stride(int size);
};

struct TileRecord {
  int x = 0;
  int y = 0;
  int size = 0;
  double entropy = 0.0;
  bool kept = false;
  std::optional<double> probability;

  Rect rect() const { return Rect{x, y, size, size}; }
};

// Number of fully contained tile origins along one axis (0 when dim < size).
int tiles_along(int dim, int size, int stride);

// All fully contained tiles in row-major order. Throws DataError when the
// image is smaller than one tile.
std::vector<TileRecord> grid_tiles(const ImageBuffer &img, const TileSpec &spec);

// Fills entropy and the inclusive keep verdict against the luma image's own
// entropy. Order is preserved.
std::vector<TileRecord> sieve(const ImageBuffer &luma, std::vector<TileRecord> tiles);

// Same, against an explicit threshold in bits.
std::vector<TileRecord> sieve(const ImageBuffer &luma, std::vector<TileRecord> tiles,
                              double threshold);

// Kept / total. Throws UsageError on an empty list.
double coverage_fraction(const std::vector<TileRecord> &tiles);

// Tab-separated `x y size entropy kept` rows after a '#' header.
void write_tile_manifest(std::ostream &out, const std::vector<TileRecord> &tiles);

} // namespace tilesieve
