#pragma once

// Feature pack file layout (all integers little-endian):
//
//   "V7WF"                 4 bytes magic
//   u16 version = 1
//   u32 n, n bytes         image_id, UTF-8
//   4096 x f32             global feature
//   196 x 512 x f32        conv map, row-major (cell-major)
//   u32 region count
//   per region: u32 n, n bytes id, 4096 x f32
//
// Files always carry the canonical dimensions. Packs with reduced
// dimensions exist only in memory (micro experiments).

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"
#include "v7w/rng.hpp"

namespace v7w {

struct FeatureDims {
  std::size_t global = 4096;
  std::size_t cells = 196;
  std::size_t channels = 512;

  static constexpr FeatureDims canonical() { return {}; }
  friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

struct FeaturePack {
  std::string image_id;
  Tensor global_feature;  // [global]
  Tensor conv_map;        // [cells x channels]
  std::map<std::string, Tensor> region_features;

  FeatureDims dims() const { return {global_feature.size(), conv_map.dim(0), conv_map.dim(1)}; }

  const Tensor& region(const std::string& id) const {
    auto it = region_features.find(id);
    if (it == region_features.end()) {
      throw IndexError("feature pack " + image_id + " has no region feature for " + id);
    }
    return it->second;
  }

  friend bool operator==(const FeaturePack&, const FeaturePack&) = default;
};

inline void validate_pack(const FeaturePack& pack, const FeatureDims& dims) {
  const std::string who = "feature pack " + pack.image_id + ": ";
  if (pack.global_feature.rank() != 1 || pack.global_feature.size() != dims.global) {
    throw ValidationError(who + "global feature must have " + std::to_string(dims.global) + " entries");
  }
  if (pack.conv_map.rank() != 2 || pack.conv_map.dim(0) != dims.cells || pack.conv_map.dim(1) != dims.channels) {
    throw ValidationError(who + "conv map must be " + std::to_string(dims.cells) + "x" + std::to_string(dims.channels));
  }
  if (!pack.global_feature.all_finite() || !pack.conv_map.all_finite()) throw ValidationError(who + "non-finite entry");
  for (const auto& [id, f] : pack.region_features) {
    if (f.rank() != 1 || f.size() != dims.global) {
      throw ValidationError(who + "region " + id + " must have " + std::to_string(dims.global) + " entries");
    }
    if (!f.all_finite()) throw ValidationError(who + "region " + id + " has a non-finite entry");
  }
}

inline constexpr std::array<char, 4> kPackMagic = {'V', '7', 'W', 'F'};
inline constexpr std::uint16_t kPackVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u16(std::uint16_t v) {
    bytes_.push_back(static_cast<char>(v & 0xff));
    bytes_.push_back(static_cast<char>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw FormatError(source_ + ": truncated at byte offset " + std::to_string(pos_) + " reading " +
                        std::string(what) + ": expected " + std::to_string(n) + " bytes, " +
                        std::to_string(remaining()) + " available (file length " +
                        std::to_string(bytes_.size()) + ", expected at least " + std::to_string(pos_ + n) + ")");
    }
  }
  std::uint16_t u16(std::string_view what) {
    need(2, what);
    const auto b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(std::string_view what) {
    need(4, what);
    const auto b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64(std::string_view what) {
    const std::uint64_t lo = u32(what);
    const std::uint64_t hi = u32(what);
    return lo | (hi << 32);
  }
  double f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }
  std::string_view raw(std::size_t n, std::string_view what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str(std::string_view what) {
    const std::uint32_t n = u32(what);
    return std::string(raw(n, what));
  }
  /// Reads `count` float32 values, rejecting non-finite ones.
  void f32_block(std::span<double> out, std::string_view what) {
    need(out.size() * 4, what);
    for (double& v : out) {
      const float f = std::bit_cast<float>(u32(what));
      if (!std::isfinite(f)) {
        throw FormatError(source_ + ": non-finite value in " + std::string(what) + " at byte offset " +
                          std::to_string(pos_ - 4));
      }
      v = static_cast<double>(f);
    }
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError(source_ + ": " + message + " at byte offset " + std::to_string(pos_));
  }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) extra = 0;
    else if ((c >> 5) == 0x6) extra = 1;
    else if ((c >> 4) == 0xe) extra = 2;
    else if ((c >> 3) == 0x1e) extra = 3;
    else return false;
    for (std::size_t k = 1; k <= extra; ++k)
      if (i + k >= s.size() || (static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    if (c < 0x20 || c == 0x7f) return false;
    i += extra + 1;
  }
  return true;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw StorageError("write failed for " + path);
}

}  // namespace detail

inline std::string encode_feature_pack(const FeaturePack& pack) {
  validate_pack(pack, FeatureDims::canonical());
  detail::ByteWriter w;
  w.raw(std::string_view(kPackMagic.data(), kPackMagic.size()));
  w.u16(kPackVersion);
  w.str(pack.image_id);
  for (double v : pack.global_feature.data()) w.f32(v);
  for (double v : pack.conv_map.data()) w.f32(v);
  w.u32(static_cast<std::uint32_t>(pack.region_features.size()));
  for (const auto& [id, f] : pack.region_features) {
    w.str(id);
    for (double v : f.data()) w.f32(v);
  }
  return w.bytes();
}

inline FeaturePack decode_feature_pack(std::string_view bytes, const std::string& source = "feature pack") {
  const FeatureDims dims = FeatureDims::canonical();
  detail::ByteReader r(bytes, source);
  const auto magic = r.raw(4, "magic");
  if (magic != std::string_view(kPackMagic.data(), kPackMagic.size())) {
    throw FormatError(source + ": bad magic bytes (not a V7WF feature pack)");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kPackVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  FeaturePack pack;
  pack.image_id = r.str("image_id");
  if (pack.image_id.empty() || !detail::valid_utf8(pack.image_id)) r.fail("invalid image_id");
  pack.global_feature = Tensor({dims.global});
  r.f32_block(pack.global_feature.data(), "global feature");
  pack.conv_map = Tensor({dims.cells, dims.channels});
  r.f32_block(pack.conv_map.data(), "conv map");
  const std::uint32_t regions = r.u32("region count");
  for (std::uint32_t i = 0; i < regions; ++i) {
    std::string id = r.str("region id");
    if (id.empty() || !detail::valid_utf8(id)) r.fail("invalid region id");
    Tensor f({dims.global});
    r.f32_block(f.data(), "region feature");
    if (!pack.region_features.emplace(std::move(id), std::move(f)).second) r.fail("duplicate region id");
  }
  if (r.remaining() != 0) {
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes after offset " +
                      std::to_string(r.offset()) + " (expected length " + std::to_string(r.offset()) + ", actual " +
                      std::to_string(bytes.size()) + ")");
  }
  return pack;
}

inline void write_feature_pack(const FeaturePack& pack, const std::string& path) {
  detail::write_file_bytes(path, encode_feature_pack(pack));
}

inline FeaturePack read_feature_pack(const std::string& path) {
  return decode_feature_pack(detail::read_file_bytes(path), path);
}

/// Size in bytes of an encoded pack with canonical dimensions.
inline std::size_t encoded_pack_size(std::size_t image_id_bytes, std::span<const std::size_t> region_id_bytes) {
  const FeatureDims d = FeatureDims::canonical();
  std::size_t n = 4 + 2 + 4 + image_id_bytes + 4 * (d.global + d.cells * d.channels) + 4;
  for (std::size_t len : region_id_bytes) n += 4 + len + 4 * d.global;
  return n;
}

// ---------------------------------------------------------------------------
// Synthetic packs

/// Coordinates used by planted signals. Class c is written into global
/// coordinates [c*block, (c+1)*block) and into conv channels
/// [c*channel_block, (c+1)*channel_block) of every cell, so attention sees it
/// at each step. The correct region carries a marker in [4*block, 5*block).
struct PlantLayout {
  std::size_t block = 0;
  std::size_t channel_block = 0;
  double strength = 2.0;

  static PlantLayout for_dims(const FeatureDims& dims) {
    return {std::max<std::size_t>(1, dims.global / 8), std::max<std::size_t>(1, dims.channels / 8), 2.0};
  }
};

inline constexpr double kSynthNoise = 0.5;

/// Values are rounded through float so synthetic packs survive the file
/// format bit for bit.
inline FeaturePack synth_feature_pack(const std::string& image_id, std::uint64_t seed,
                                      std::optional<std::size_t> planted_signal = std::nullopt,
                                      const std::vector<std::string>& region_ids = {},
                                      const FeatureDims& dims = FeatureDims::canonical()) {
  const PlantLayout layout = PlantLayout::for_dims(dims);
  if (planted_signal && *planted_signal >= 4) throw DomainError("planted signal must be a candidate index 0..3");
  if (planted_signal && !region_ids.empty() && *planted_signal >= region_ids.size()) {
    throw DomainError("planted signal does not name one of the supplied regions");
  }
  Rng rng(mix_seed(seed, image_id));
  auto noise = [&] { return static_cast<double>(static_cast<float>(rng.uniform() * kSynthNoise)); };
  auto plant = [&](Tensor& t, std::size_t first) {
    for (std::size_t i = first; i < first + layout.block && i < t.size(); ++i) {
      t[i] = static_cast<double>(static_cast<float>(t[i] + layout.strength));
    }
  };
  FeaturePack pack;
  pack.image_id = image_id;
  pack.global_feature = Tensor({dims.global});
  for (double& v : pack.global_feature.data()) v = noise();
  pack.conv_map = Tensor({dims.cells, dims.channels});
  for (double& v : pack.conv_map.data()) v = noise();
  for (std::size_t r = 0; r < region_ids.size(); ++r) {
    Tensor f({dims.global});
    for (double& v : f.data()) v = noise();
    if (planted_signal && *planted_signal == r) plant(f, 4 * layout.block);
    pack.region_features.emplace(region_ids[r], std::move(f));
  }
  if (planted_signal) {
    plant(pack.global_feature, *planted_signal * layout.block);
    const std::size_t first = *planted_signal * layout.channel_block;
    for (std::size_t j = 0; j < dims.cells; ++j) {
      for (std::size_t k = first; k < first + layout.channel_block && k < dims.channels; ++k) {
        pack.conv_map(j, k) = static_cast<double>(static_cast<float>(pack.conv_map(j, k) + layout.strength));
      }
    }
  }
  return pack;
}

/// Resolves an image_id to its pack; the reference must outlive the call site.
using PackLookup = std::function<const FeaturePack&(const std::string& image_id)>;

inline PackLookup lookup_in(const std::map<std::string, FeaturePack>& packs) {
  return [&packs](const std::string& id) -> const FeaturePack& {
    auto it = packs.find(id);
    if (it == packs.end()) throw StorageError("no feature pack for image " + id);
    return it->second;
  };
}

/// Directory of "<image_id>.v7wf" files with a load-once cache.
class FeatureStore {
 public:
  explicit FeatureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string file_name(const std::string& image_id) { return image_id + ".v7wf"; }

  const FeaturePack& get(const std::string& image_id) const {
    auto it = cache_.find(image_id);
    if (it != cache_.end()) return it->second;
    FeaturePack pack = read_feature_pack((dir_ / file_name(image_id)).string());
    if (pack.image_id != image_id) {
      throw ValidationError("feature file for " + image_id + " holds image_id " + pack.image_id);
    }
    return cache_.emplace(image_id, std::move(pack)).first->second;
  }

  void put(const FeaturePack& pack) const {
    write_feature_pack(pack, (dir_ / file_name(pack.image_id)).string());
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::map<std::string, FeaturePack> cache_;
};

}  // namespace v7w
