#pragma once

#include "tilesieve/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace tilesieve {

struct Histogram {
  std::array<std::uint64_t, 256> bins{};
  std::uint64_t total = 0;

  Histogram &operator+=(const Histogram &other);
  friend bool operator==(const Histogram &, const Histogram &) = default;
};

// Decodes PNG (8/16-bit gray or RGB) and binary PGM/PPM. Throws DataError.
ImageBuffer load_image(const std::filesystem::path &path);

// BT.601 luma, rounded half-up. One-channel input is returned unchanged.
ImageBuffer to_luma(const ImageBuffer &img);

// Luma histogram of `region`; the image must be single-channel.
Histogram histogram(const ImageBuffer &img, const Rect &region);
Histogram histogram(const ImageBuffer &img);

// Shannon entropy in bits, with 0 log 0 = 0.
double shannon_entropy(const Histogram &h);

// Entropy of a whole single-channel image.
double image_entropy(const ImageBuffer &luma);

} // namespace tilesieve
