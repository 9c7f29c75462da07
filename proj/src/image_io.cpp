#include "tilesieve/image_io.hpp"

#include "tilesieve/error.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace tilesieve {

namespace {

// Upper bound on decoded samples; anything larger is treated as an overflow.
constexpr std::uint64_t kMaxSamples = std::uint64_t{1} << 32;

void check_dimensions(std::uint64_t width, std::uint64_t height,
                      std::uint64_t samples_per_pixel) {
  if (width == 0 || height == 0) {
    throw DataError("unreadable image: zero dimension");
  }
  if (width > static_cast<std::uint64_t>(std::numeric_limits<int>::max()) ||
      height > static_cast<std::uint64_t>(std::numeric_limits<int>::max()) ||
      width * height > kMaxSamples / samples_per_pixel) {
    throw DataError("dimension overflow: " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

// libpng reports errors through longjmp. The setjmp scopes below hold no
// objects with destructors; callers own every C++ resource.
struct PngIo {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
  std::vector<std::uint8_t> *out = nullptr;
  char error[256] = {};
};

PngIo &png_io(png_structp png) { return *static_cast<PngIo *>(png_get_error_ptr(png)); }

void on_png_error(png_structp png, png_const_charp msg) {
  std::snprintf(png_io(png).error, sizeof png_io(png).error, "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void read_png_bytes(png_structp png, png_bytep dst, std::size_t n) {
  PngIo &io = png_io(png);
  if (n > io.in.size() - io.pos) png_error(png, "truncated data");
  std::memcpy(dst, io.in.data() + io.pos, n);
  io.pos += n;
}

void write_png_bytes(png_structp png, png_bytep src, std::size_t n) {
  png_io(png).out->insert(png_io(png).out->end(), src, src + n);
}

void flush_png(png_structp) {}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int interlace = 0;
  bool transparency = false;
};

bool read_png_header(png_structp png, png_infop info, PngHeader *h) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  png_get_IHDR(png, info, &h->width, &h->height, &h->bit_depth, &h->color_type, &h->interlace,
               nullptr, nullptr);
  h->transparency = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  return true;
}

// 16-bit samples keep their high byte.
bool read_png_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_strip_16(png);
  png_read_update_info(png, info);
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

bool write_png_image(png_structp png, png_infop info, int width, int height, int channels,
                     png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, info);
  return true;
}

// PNM header token reader: skips whitespace and '#' comments.
class PnmReader {
public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t next_uint() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw DataError("unreadable PNM: malformed header");
    }
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw DataError("dimension overflow in PNM header");
      }
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw DataError("unreadable PNM: malformed header");
    }
    return pos_ + 1;
  }

  void seek(std::size_t pos) { pos_ = pos; }

private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

} // namespace

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw DataError("unsupported format: missing PNG signature");
  }
  PngIo io{bytes};
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &io, on_png_error, on_png_warning);
  if (png == nullptr) throw std::runtime_error("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp *png;
    png_infop *info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  if (info == nullptr) throw std::runtime_error("libpng initialization failed");
  png_set_read_fn(png, &io, read_png_bytes);

  PngHeader h;
  if (!read_png_header(png, info, &h)) {
    throw DataError(std::string("unreadable PNG: ") + io.error);
  }
  if (h.interlace != PNG_INTERLACE_NONE) {
    throw DataError("unsupported format: interlaced PNG");
  }
  if ((h.color_type & PNG_COLOR_MASK_ALPHA) != 0 || h.transparency) {
    throw DataError("unsupported format: PNG alpha channels are not supported");
  }
  if (h.color_type != PNG_COLOR_TYPE_GRAY && h.color_type != PNG_COLOR_TYPE_RGB) {
    throw DataError("unsupported format: PNG color type " + std::to_string(h.color_type));
  }
  if (h.bit_depth != 8 && h.bit_depth != 16) {
    throw DataError("unsupported format: PNG bit depth " + std::to_string(h.bit_depth));
  }
  const int channels = h.color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  check_dimensions(h.width, h.height, static_cast<std::uint64_t>(channels) * (h.bit_depth / 8));

  const std::size_t row_bytes = static_cast<std::size_t>(h.width) * channels;
  std::vector<std::uint8_t> data(row_bytes * h.height);
  std::vector<png_bytep> rows(h.height);
  for (std::size_t y = 0; y < h.height; ++y) rows[y] = data.data() + y * row_bytes;
  if (!read_png_rows(png, info, rows.data())) {
    throw DataError(std::string("unreadable PNG: ") + io.error);
  }
  return ImageBuffer(static_cast<int>(h.width), static_cast<int>(h.height), channels,
                     std::move(data));
}

ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DataError("unsupported format: expected binary PGM (P5) or PPM (P6)");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  PnmReader reader(bytes);
  reader.seek(2);
  const std::uint64_t width = reader.next_uint();
  const std::uint64_t height = reader.next_uint();
  const std::uint64_t maxval = reader.next_uint();
  if (maxval == 0 || maxval > 65535) {
    throw DataError("unreadable PNM: bad maxval " + std::to_string(maxval));
  }
  const std::uint64_t sample_bytes = maxval > 255 ? 2 : 1;
  check_dimensions(width, height, channels * sample_bytes);
  const std::size_t offset = reader.raster_offset();
  const std::size_t samples = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() - offset < samples * sample_bytes) {
    throw DataError("unreadable PNM: truncated raster");
  }
  std::vector<std::uint8_t> data(samples);
  const std::uint8_t *src = bytes.data() + offset;
  for (std::size_t i = 0; i < samples; ++i) {
    // Samples are scaled to 8 bits from whatever maxval the file declares;
    // for 16-bit files this is the high byte when maxval is 65535.
    const std::uint32_t v = sample_bytes == 2
                                ? (std::uint32_t{src[2 * i]} << 8) | src[2 * i + 1]
                                : src[i];
    if (maxval == 255) {
      data[i] = static_cast<std::uint8_t>(v);
    } else if (maxval == 65535) {
      data[i] = static_cast<std::uint8_t>(v >> 8);
    } else {
      data[i] = static_cast<std::uint8_t>(
          std::min<std::uint64_t>(255, (v * 255 + maxval / 2) / maxval));
    }
  }
  return ImageBuffer(static_cast<int>(width), static_cast<int>(height), channels,
                     std::move(data));
}

std::vector<std::uint8_t> encode_png(const ImageBuffer &img) {
  std::vector<std::uint8_t> out;
  PngIo io;
  io.out = &out;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &io, on_png_error, on_png_warning);
  if (png == nullptr) throw std::runtime_error("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp *png;
    png_infop *info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (info == nullptr) throw std::runtime_error("libpng initialization failed");
  png_set_write_fn(png, &io, write_png_bytes, flush_png);

  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = const_cast<png_bytep>(img.row(y).data());
  }
  if (!write_png_image(png, info, img.width(), img.height(), img.channels(), rows.data())) {
    throw std::runtime_error(std::string("PNG encoding failed: ") + io.error);
  }
  return out;
}

std::vector<std::uint8_t> encode_pnm(const ImageBuffer &img) {
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") +
                             "\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("unreadable file: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw DataError("unreadable file: " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path &path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("cannot write file: " + path.string());
  }
}

void write_png(const ImageBuffer &img, const std::filesystem::path &path) {
  write_file_bytes(path, encode_png(img));
}

void write_pnm(const ImageBuffer &img, const std::filesystem::path &path) {
  write_file_bytes(path, encode_pnm(img));
}

} // namespace tilesieve
