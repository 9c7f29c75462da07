#include "tilesieve/image.hpp"

#include "tilesieve/error.hpp"

#include <string>
#include <utility>

namespace tilesieve {

namespace {

std::size_t checked_size(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw UsageError("image dimensions must be positive, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw UsageError("image must have 1 or 3 channels, got " +
                     std::to_string(channels));
  }
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
         static_cast<std::size_t>(channels);
}

} // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels),
      data_(checked_size(width, height, channels), fill) {}

ImageBuffer::ImageBuffer(int width, int height, int channels,
                         std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels),
      data_(std::move(data)) {
  if (data_.size() != checked_size(width, height, channels)) {
    throw UsageError("image data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
}

} // namespace tilesieve
