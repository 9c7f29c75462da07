#pragma once

#include "tilesieve/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tilesieve {

ImageBuffer decode_png(std::span<const std::uint8_t> bytes);
ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes);

// 8-bit, non-interlaced, deflate level 6. Output is deterministic for a given
// libpng/zlib build.
std::vector<std::uint8_t> encode_png(const ImageBuffer &img);
std::vector<std::uint8_t> encode_pnm(const ImageBuffer &img);

void write_png(const ImageBuffer &img, const std::filesystem::path &path);
void write_pnm(const ImageBuffer &img, const std::filesystem::path &path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path,
                      std::span<const std::uint8_t> bytes);

} // namespace tilesieve
