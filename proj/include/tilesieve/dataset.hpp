#pragma once

#include "tilesieve/image.hpp"
#include "tilesieve/tiler.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tilesieve {

enum class Label { negative = 0, positive = 1 };
enum class Split { train, val, test };

// Manifest tokens: `pos`/`neg`, `train`/`val`/`test`.
std::string_view to_token(Label label);
std::string_view to_token(Split split);
Label parse_label(std::string_view token);
Split parse_split(std::string_view token);

struct ManifestEntry {
  std::filesystem::path path;
  Label label = Label::negative;
  std::string painting_id;
  Split split = Split::train;
};

// Tab-separated `path label painting_id split`; '#' starts a comment line.
// Relative paths resolve against `base_dir`. Throws DataError naming the line
// on malformed rows and on a painting_id whose label or split conflicts.
std::vector<ManifestEntry> parse_manifest(std::istream &in,
                                          const std::filesystem::path &base_dir,
                                          const std::string &source_name = "manifest");
std::vector<ManifestEntry> read_manifest(const std::filesystem::path &path);
void write_manifest(std::ostream &out, const std::vector<ManifestEntry> &entries,
                    const std::filesystem::path &base_dir);

struct TileSample {
  // Channel-major (C x size x size) samples scaled by 1/255.
  std::vector<float> pixels;
  Label label = Label::negative;
  std::string painting_id;
  int x = 0;
  int y = 0;
};

struct TileDataset {
  int tile_size = 0;
  int channels = 0;
  std::vector<TileSample> samples;
  // Non-fatal notes, e.g. a painting that contributed no tiles.
  std::vector<std::string> warnings;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Normalized channel-major copy of the square region at (x, y).
std::vector<float> tile_tensor(const ImageBuffer &img, int x, int y, int size);

// Loads every entry of `split`, sieves its tiles on luma and keeps the
// original-channel pixels of the survivors. Manifest order, then row-major.
TileDataset build_dataset(const std::vector<ManifestEntry> &entries,
                          const TileSpec &spec, Split split);

struct ClassBalance {
  double positive_fraction = 0.0;
  std::size_t positives = 0;
  std::size_t total = 0;
  // In order of first appearance.
  std::vector<std::pair<std::string, std::size_t>> tiles_per_painting;
};

ClassBalance class_balance(const TileDataset &ds);

} // namespace tilesieve
