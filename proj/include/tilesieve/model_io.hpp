#pragma once

#include "tilesieve/cnn.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tilesieve {

// Model file layout, all integers little-endian:
//   "ATRM" | u32 version | config block | u64 weight count |
//   f64 weights in tensor declaration order | u32 CRC-32 of everything before
std::vector<std::uint8_t> serialize_model(const CnnModel &model);
// Throws DataError on bad magic, newer/unknown version, or checksum mismatch.
CnnModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const CnnModel &model, const std::filesystem::path &path);
CnnModel load_model(const std::filesystem::path &path);

} // namespace tilesieve
