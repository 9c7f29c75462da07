#include "tilesieve/dataset.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/imaging.hpp"
#include "tilesieve/parallel.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace tilesieve {

namespace {

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool is_blank(const std::string &s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

struct ImageTiles {
  std::vector<TileSample> samples;
  std::size_t total = 0;
  int channels = 0;
};

} // namespace

std::string_view to_token(Label label) {
  return label == Label::positive ? "pos" : "neg";
}

std::string_view to_token(Split split) {
  switch (split) {
  case Split::train: return "train";
  case Split::val: return "val";
  case Split::test: return "test";
  }
  return "?";
}

Label parse_label(std::string_view token) {
  if (token == "pos") return Label::positive;
  if (token == "neg") return Label::negative;
  throw DataError("unknown label '" + std::string(token) + "' (expected pos or neg)");
}

Split parse_split(std::string_view token) {
  if (token == "train") return Split::train;
  if (token == "val") return Split::val;
  if (token == "test") return Split::test;
  throw DataError("unknown split '" + std::string(token) +
                  "' (expected train, val or test)");
}

std::vector<ManifestEntry> parse_manifest(std::istream &in,
                                          const std::filesystem::path &base_dir,
                                          const std::string &source_name) {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::size_t> by_painting;
  std::map<std::string, std::string> painting_by_path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line) || line.front() == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw DataError(where + "expected 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    ManifestEntry e;
    try {
      e.label = parse_label(fields[1]);
      e.split = parse_split(fields[3]);
    } catch (const DataError &err) {
      throw DataError(where + err.what());
    }
    if (fields[0].empty() || fields[2].empty()) {
      throw DataError(where + "empty path or painting_id");
    }
    e.path = std::filesystem::path(fields[0]);
    if (e.path.is_relative()) e.path = base_dir / e.path;
    e.painting_id = fields[2];

    const auto prior_id = painting_by_path.find(e.path.lexically_normal().string());
    if (prior_id != painting_by_path.end() && prior_id->second != e.painting_id) {
      throw DataError(where + "file " + fields[0] + " already listed as painting " +
                      prior_id->second);
    }
    painting_by_path[e.path.lexically_normal().string()] = e.painting_id;

    if (const auto it = by_painting.find(e.painting_id); it != by_painting.end()) {
      const ManifestEntry &first = entries[it->second];
      if (first.split != e.split) {
        throw DataError(where + "painting " + e.painting_id + " appears in both " +
                        std::string(to_token(first.split)) + " and " +
                        std::string(to_token(e.split)) + " splits");
      }
      if (first.label != e.label) {
        throw DataError(where + "painting " + e.painting_id +
                        " has conflicting labels");
      }
    } else {
      by_painting.emplace(e.painting_id, entries.size());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

void write_manifest(std::ostream &out, const std::vector<ManifestEntry> &entries,
                    const std::filesystem::path &base_dir) {
  out << "# path\tlabel\tpainting_id\tsplit\n";
  for (const auto &e : entries) {
    out << e.path.lexically_relative(base_dir).generic_string() << '\t'
        << to_token(e.label) << '\t' << e.painting_id << '\t' << to_token(e.split)
        << '\n';
  }
}

std::vector<float> tile_tensor(const ImageBuffer &img, int x, int y, int size) {
  const int channels = img.channels();
  std::vector<float> out(static_cast<std::size_t>(channels) * size * size);
  for (int c = 0; c < channels; ++c) {
    float *plane = out.data() + static_cast<std::size_t>(c) * size * size;
    for (int r = 0; r < size; ++r) {
      for (int col = 0; col < size; ++col) {
        plane[r * size + col] = static_cast<float>(img.at(x + col, y + r, c)) / 255.0f;
      }
    }
  }
  return out;
}

TileDataset build_dataset(const std::vector<ManifestEntry> &entries,
                          const TileSpec &spec, Split split) {
  spec.validate();
  std::vector<const ManifestEntry *> selected;
  for (const auto &e : entries) {
    if (e.split == split) selected.push_back(&e);
  }
  if (selected.empty()) {
    throw DataError("manifest has no entries in split " +
                    std::string(to_token(split)));
  }

  std::vector<ImageTiles> per_image(selected.size());
  parallel_for(selected.size(), [&](std::size_t i) {
    const ManifestEntry &e = *selected[i];
    ImageBuffer img;
    std::vector<TileRecord> tiles;
    try {
      img = load_image(e.path);
      tiles = grid_tiles(img, spec);
    } catch (const DataError &err) {
      throw DataError("painting " + e.painting_id + ": " + err.what());
    }
    tiles = sieve(to_luma(img), std::move(tiles));
    ImageTiles &out = per_image[i];
    out.total = tiles.size();
    out.channels = img.channels();
    for (const auto &t : tiles) {
      if (!t.kept) continue;
      out.samples.push_back(
          TileSample{tile_tensor(img, t.x, t.y, t.size), e.label, e.painting_id, t.x, t.y});
    }
  });

  TileDataset ds;
  ds.tile_size = spec.size;
  ds.channels = per_image.front().channels;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    ImageTiles &tiles = per_image[i];
    if (tiles.channels != ds.channels) {
      throw DataError("painting " + selected[i]->painting_id + " has " +
                      std::to_string(tiles.channels) + " channels, expected " +
                      std::to_string(ds.channels));
    }
    if (tiles.samples.empty()) {
      ds.warnings.push_back("painting " + selected[i]->painting_id + ": 0 of " +
                            std::to_string(tiles.total) +
                            " tiles passed the entropy sieve");
    }
    for (auto &s : tiles.samples) ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) {
    throw DataError("no tiles survived the entropy sieve in split " +
                    std::string(to_token(split)));
  }
  return ds;
}

ClassBalance class_balance(const TileDataset &ds) {
  if (ds.empty()) throw UsageError("class balance of an empty dataset");
  ClassBalance b;
  std::map<std::string, std::size_t> index;
  for (const auto &s : ds.samples) {
    if (s.label == Label::positive) ++b.positives;
    auto [it, inserted] = index.emplace(s.painting_id, b.tiles_per_painting.size());
    if (inserted) b.tiles_per_painting.emplace_back(s.painting_id, 0);
    ++b.tiles_per_painting[it->second].second;
  }
  b.total = ds.size();
  b.positive_fraction = static_cast<double>(b.positives) / static_cast<double>(b.total);
  return b;
}

} // namespace tilesieve
