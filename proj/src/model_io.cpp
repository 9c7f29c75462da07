#include "tilesieve/model_io.hpp"

#include "tilesieve/error.hpp"
#include "tilesieve/image_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <string>

namespace tilesieve {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'R', 'M'};

class Writer {
public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) throw DataError("corrupt model file: unexpected end of data");
    const auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

int to_int(std::uint32_t v) {
  if (v > 1u << 30) throw DataError("corrupt model file: implausible config value");
  return static_cast<int>(v);
}

} // namespace

std::vector<std::uint8_t> serialize_model(const CnnModel &model) {
  const CnnConfig &cfg = model.config();
  Writer w;
  for (const char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(cfg.input_size));
  w.u32(static_cast<std::uint32_t>(cfg.input_channels));
  w.u32(static_cast<std::uint32_t>(cfg.conv_layers.size()));
  for (const auto &s : cfg.conv_layers) {
    w.u32(static_cast<std::uint32_t>(s.filters));
    w.u32(static_cast<std::uint32_t>(s.kernel));
    w.u8(static_cast<std::uint8_t>(s.pool));
  }
  w.u32(static_cast<std::uint32_t>(cfg.dense_units));
  w.u64(cfg.seed);
  w.f64(cfg.learning_rate);
  w.f64(cfg.momentum);
  w.u32(static_cast<std::uint32_t>(cfg.epochs));
  w.u32(static_cast<std::uint32_t>(cfg.batch_size));
  w.u32(static_cast<std::uint32_t>(model.trained_epochs()));
  w.u64(model.weights().size());
  for (const double v : model.weights()) w.f64(v);
  w.u32(crc_of(w.bytes));
  return std::move(w.bytes);
}

CnnModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a model file (missing ATRM magic)");
  }
  Reader header(bytes.subspan(4, 4));
  const std::uint32_t version = header.u32();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) +
                    " (this build reads version " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  if (bytes.size() < 12) {
    throw DataError("corrupt model file: checksum missing (file truncated)");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  if (crc_of(body) != trailer.u32()) {
    throw DataError("corrupt model file: checksum mismatch");
  }

  Reader r(body.subspan(8));
  CnnConfig cfg;
  cfg.input_size = to_int(r.u32());
  cfg.input_channels = to_int(r.u32());
  const std::uint32_t stages = r.u32();
  if (stages > 64) throw DataError("corrupt model file: too many conv stages");
  cfg.conv_layers.clear();
  for (std::uint32_t i = 0; i < stages; ++i) {
    ConvStage s;
    s.filters = to_int(r.u32());
    s.kernel = to_int(r.u32());
    const std::uint8_t pool = r.u8();
    if (pool > 1) throw DataError("corrupt model file: unknown pool type");
    s.pool = static_cast<Pool>(pool);
    cfg.conv_layers.push_back(s);
  }
  cfg.dense_units = to_int(r.u32());
  cfg.seed = r.u64();
  cfg.learning_rate = r.f64();
  cfg.momentum = r.f64();
  cfg.epochs = to_int(r.u32());
  cfg.batch_size = to_int(r.u32());
  const int trained_epochs = to_int(r.u32());
  const std::uint64_t count = r.u64();
  if (count != r.remaining() / 8 || r.remaining() % 8 != 0) {
    throw DataError("corrupt model file: weight count does not match payload");
  }
  std::vector<double> weights(count);
  for (auto &v : weights) v = r.f64();
  try {
    return CnnModel(std::move(cfg), std::move(weights), trained_epochs);
  } catch (const UsageError &e) {
    throw DataError(std::string("corrupt model file: ") + e.what());
  }
}

void save_model(const CnnModel &model, const std::filesystem::path &path) {
  write_file_bytes(path, serialize_model(model));
}

CnnModel load_model(const std::filesystem::path &path) {
  try {
    return deserialize_model(read_file_bytes(path));
  } catch (const DataError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

} // namespace tilesieve
