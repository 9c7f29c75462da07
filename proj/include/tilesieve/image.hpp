#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tilesieve {

// Decoded raster image with 8-bit samples, row-major, channels interleaved.
class ImageBuffer {
public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0);
  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[index(x, y, c)];
  }
  std::uint8_t &at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> row(int y) const {
    return std::span<const std::uint8_t>(data_).subspan(
        static_cast<std::size_t>(y) * width_ * channels_,
        static_cast<std::size_t>(width_) * channels_);
  }

  friend bool operator==(const ImageBuffer &, const ImageBuffer &) = default;

private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long long area() const { return static_cast<long long>(width) * height; }
  bool contains(int px, int py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
  friend bool operator==(const Rect &, const Rect &) = default;
};

} // namespace tilesieve
