#include "tilesieve/imaging.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/image_io.hpp"

#include <cmath>
#include <string>

namespace tilesieve {

Histogram &Histogram::operator+=(const Histogram &other) {
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += other.bins[i];
  total += other.total;
  return *this;
}

ImageBuffer load_image(const std::filesystem::path &path) {
  const auto bytes = read_file_bytes(path);
  try {
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
      return decode_pnm(bytes);
    }
    if (!bytes.empty() && bytes[0] == 0x89) {
      return decode_png(bytes);
    }
  } catch (const DataError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
  throw DataError(path.string() + ": unsupported format (expected PNG, PGM or PPM)");
}

ImageBuffer to_luma(const ImageBuffer &img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw UsageError("to_luma expects 1 or 3 channels");
  }
  ImageBuffer out(img.width(), img.height(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::uint32_t r = src[3 * i];
    const std::uint32_t g = src[3 * i + 1];
    const std::uint32_t b = src[3 * i + 2];
    // Integer form of round(0.299 R + 0.587 G + 0.114 B) with half-up ties.
    dst[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

Histogram histogram(const ImageBuffer &img, const Rect &region) {
  if (img.channels() != 1) {
    throw UsageError("histogram expects a single-channel image");
  }
  if (region.width < 1 || region.height < 1) {
    throw UsageError("histogram region has zero area");
  }
  if (region.x < 0 || region.y < 0 || region.x + region.width > img.width() ||
      region.y + region.height > img.height()) {
    throw UsageError("histogram region (" + std::to_string(region.x) + "," +
                     std::to_string(region.y) + "," +
                     std::to_string(region.width) + "x" +
                     std::to_string(region.height) + ") exceeds image bounds " +
                     std::to_string(img.width()) + "x" +
                     std::to_string(img.height()));
  }
  Histogram h;
  for (int y = region.y; y < region.y + region.height; ++y) {
    const auto row = img.row(y).subspan(region.x, region.width);
    for (const std::uint8_t v : row) ++h.bins[v];
  }
  h.total = static_cast<std::uint64_t>(region.area());
  return h;
}

Histogram histogram(const ImageBuffer &img) {
  return histogram(img, Rect{0, 0, img.width(), img.height()});
}

double shannon_entropy(const Histogram &h) {
  if (h.total == 0) {
    throw UsageError("entropy of an empty histogram is undefined");
  }
  const double total = static_cast<double>(h.total);
  double entropy = 0.0;
  for (const std::uint64_t count : h.bins) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    entropy -= p * std::log2(p);
  }
  // A single occupied bin gives -1*log2(1) = -0.0.
  return entropy <= 0.0 ? 0.0 : entropy;
}

double image_entropy(const ImageBuffer &luma) {
  return shannon_entropy(histogram(luma));
}

} // namespace tilesieve
