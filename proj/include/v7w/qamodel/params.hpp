#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/featurestore.hpp"
#include "v7w/numkit/tensor.hpp"
#include "v7w/rng.hpp"

namespace v7w::qamodel {

/// Widths of the recurrent attention model. `full` matches the 512-wide
/// configuration over canonical features; micro configs scale everything
/// down for gradient checks and desk-scale overfitting runs.
struct ModelConfig {
  std::size_t feature_dim = 4096;  // fc7 width (global and region features)
  std::size_t cells = 196;         // attention grid cells
  std::size_t channels = 512;      // conv map channels
  std::size_t embed = 512;         // image and word embedding width
  std::size_t hidden = 512;        // LSTM gate and memory width
  std::size_t att_dim = 512;       // attention hidden width
  std::size_t vocab = 0;

  static ModelConfig full(std::size_t vocab) {
    ModelConfig c;
    c.vocab = vocab;
    return c;
  }

  static ModelConfig micro(std::size_t vocab) {
    ModelConfig c;
    c.feature_dim = 10;
    c.cells = 4;
    c.channels = 6;
    c.embed = 8;
    c.hidden = 8;
    c.att_dim = 8;
    c.vocab = vocab;
    return c;
  }

  FeatureDims feature_dims() const { return {feature_dim, cells, channels}; }

  void validate() const {
    if (!feature_dim || !cells || !channels || !embed || !hidden || !att_dim) {
      throw ValidationError("model widths must be positive");
    }
    if (vocab < 2) throw ValidationError("model vocabulary must hold at least the two reserved tokens");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class AttentionMode { learned, uniform };

inline std::string_view to_string(AttentionMode m) { return m == AttentionMode::learned ? "learned" : "uniform"; }

enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };

/// Every learnable tensor of the model. Gate arrays are indexed by Gate.
struct ModelParams {
  ModelConfig config;

  Tensor W_img, b_img;            // [embed x feature_dim], [embed]
  Tensor W_word;                  // [embed x vocab], one column per token
  std::array<Tensor, 4> W_v;      // [hidden x embed]
  std::array<Tensor, 4> W_h;      // [hidden x hidden]
  std::array<Tensor, 4> W_r;      // [hidden x channels]
  std::array<Tensor, 4> b_gate;   // [hidden]
  Tensor W_he, W_ce, w_a, b_a;    // [att x hidden], [att x channels], [att], [1]
  Tensor W_s, b_s;                // [vocab x hidden], [vocab]
  Tensor W_p, b_p;                // [hidden x feature_dim], [hidden]

  /// All tensors zero-filled with the shapes implied by `cfg`.
  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    p.W_img = Tensor({cfg.embed, cfg.feature_dim});
    p.b_img = Tensor({cfg.embed});
    p.W_word = Tensor({cfg.embed, cfg.vocab});
    for (std::size_t g = 0; g < 4; ++g) {
      p.W_v[g] = Tensor({cfg.hidden, cfg.embed});
      p.W_h[g] = Tensor({cfg.hidden, cfg.hidden});
      p.W_r[g] = Tensor({cfg.hidden, cfg.channels});
      p.b_gate[g] = Tensor({cfg.hidden});
    }
    p.W_he = Tensor({cfg.att_dim, cfg.hidden});
    p.W_ce = Tensor({cfg.att_dim, cfg.channels});
    p.w_a = Tensor({cfg.att_dim});
    p.b_a = Tensor({1});
    p.W_s = Tensor({cfg.vocab, cfg.hidden});
    p.b_s = Tensor({cfg.vocab});
    p.W_p = Tensor({cfg.hidden, cfg.feature_dim});
    p.b_p = Tensor({cfg.hidden});
    return p;
  }

  /// Visits (name, tensor, is_bias) in checkpoint order.
  template <class F>
  void for_each_tagged(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void for_each_tagged(F&& f) const {
    visit_impl(*this, f);
  }

  template <class F>
  void for_each(F&& f) {
    for_each_tagged([&](std::string_view n, Tensor& t, bool) { f(n, t); });
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_tagged([&](std::string_view n, const Tensor& t, bool) { f(n, t); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](std::string_view, const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
    return n;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    f("W_i", s.W_img, false);
    f("b_i", s.b_img, true);
    f("W_w", s.W_word, false);
    static const std::array<std::string, 4> wv = {"W_vi", "W_vf", "W_vo", "W_vg"};
    static const std::array<std::string, 4> wh = {"W_hi", "W_hf", "W_ho", "W_hg"};
    static const std::array<std::string, 4> wr = {"W_ri", "W_rf", "W_ro", "W_rg"};
    static const std::array<std::string, 4> bg = {"b_gi", "b_gf", "b_go", "b_gg"};
    for (std::size_t g = 0; g < 4; ++g) f(std::string_view(wv[g]), s.W_v[g], false);
    for (std::size_t g = 0; g < 4; ++g) f(std::string_view(wh[g]), s.W_h[g], false);
    for (std::size_t g = 0; g < 4; ++g) f(std::string_view(wr[g]), s.W_r[g], false);
    for (std::size_t g = 0; g < 4; ++g) f(std::string_view(bg[g]), s.b_gate[g], true);
    f("W_he", s.W_he, false);
    f("W_ce", s.W_ce, false);
    f("w_a", s.w_a, false);
    f("b_a", s.b_a, true);
    f("W_s", s.W_s, false);
    f("b_s", s.b_s, true);
    f("W_p", s.W_p, false);
    f("b_p", s.b_p, true);
  }
};

/// Weights uniform in [-s, s] with s = 1/sqrt(fan_in) (fan_in = trailing
/// extent; vectors use their length), biases zero.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(cfg);
  Rng rng(seed);
  p.for_each_tagged([&](std::string_view, Tensor& t, bool is_bias) {
    if (is_bias) return;
    const std::size_t fan_in = t.shape().back();
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-s, s);
  });
  return p;
}

/// Output bias for tokens that must carry no probability mass.
inline constexpr double kMaskedLogit = -1000.0;

/// Same model over a larger vocabulary. Existing token indices keep their
/// parameters; appended tokens get zero embeddings and output rows whose
/// bias is low enough that their probability underflows to exactly zero.
inline ModelParams grow_vocabulary(const ModelParams& p, std::size_t new_vocab) {
  const std::size_t old_vocab = p.config.vocab;
  if (new_vocab < old_vocab) throw DomainError("grow_vocabulary cannot shrink the vocabulary");
  ModelConfig cfg = p.config;
  cfg.vocab = new_vocab;
  ModelParams out = p;
  out.config = cfg;
  out.W_word = Tensor({cfg.embed, new_vocab});
  for (std::size_t r = 0; r < cfg.embed; ++r)
    for (std::size_t c = 0; c < old_vocab; ++c) out.W_word(r, c) = p.W_word(r, c);
  out.W_s = Tensor({new_vocab, cfg.hidden});
  for (std::size_t r = 0; r < old_vocab; ++r)
    for (std::size_t c = 0; c < cfg.hidden; ++c) out.W_s(r, c) = p.W_s(r, c);
  out.b_s = Tensor({new_vocab}, kMaskedLogit);
  for (std::size_t r = 0; r < old_vocab; ++r) out.b_s[r] = p.b_s[r];
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "V7WM", u16 version, u32 tensor count, then per tensor
// u32-length name, u32 rank, u32 extents, f64 values. Little-endian.

inline constexpr std::array<char, 4> kCheckpointMagic = {'V', '7', 'W', 'M'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const ModelParams& p) {
  detail::ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic.data(), 4));
  w.u16(kCheckpointVersion);
  std::uint32_t count = 0;
  p.for_each([&](std::string_view, const Tensor&) { ++count; });
  w.u32(count);
  p.for_each([&](std::string_view name, const Tensor& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double v : t.data()) w.f64(v);
  });
  return w.bytes();
}

inline ModelParams decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint") {
  detail::ByteReader r(bytes, source);
  if (r.raw(4, "magic") != std::string_view(kCheckpointMagic.data(), 4)) {
    throw FormatError(source + ": bad magic bytes (not a V7WM checkpoint)");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");
  std::map<std::string, Tensor> loaded;
  std::vector<std::string> order;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str("tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 2) r.fail("tensor " + name + " has unsupported rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t volume = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t e = r.u32("extent");
      if (e == 0) r.fail("tensor " + name + " has a zero extent");
      shape.push_back(e);
      volume *= e;
    }
    r.need(volume * 8, "tensor data");
    std::vector<double> data(volume);
    for (double& v : data) {
      v = r.f64("tensor data");
      if (!std::isfinite(v)) r.fail("non-finite value in " + name);
    }
    order.push_back(name);
    if (!loaded.emplace(name, Tensor(std::move(shape), std::move(data))).second) r.fail("duplicate tensor " + name);
  }
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes");

  auto take = [&](const char* name) -> Tensor& {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw FormatError(source + ": missing tensor " + name);
    return it->second;
  };
  ModelConfig cfg;
  cfg.embed = take("W_i").dim(0);
  cfg.feature_dim = take("W_i").dim(1);
  cfg.vocab = take("W_w").dim(1);
  cfg.hidden = take("W_vi").dim(0);
  cfg.channels = take("W_ri").dim(1);
  cfg.att_dim = take("W_he").dim(0);
  cfg.cells = FeatureDims::canonical().cells;  // grid size is not a parameter
  ModelParams p = ModelParams::zeros(cfg);
  std::size_t index = 0;
  p.for_each([&](std::string_view name, Tensor& t) {
    if (index >= order.size() || order[index] != name) {
      throw FormatError(source + ": expected tensor " + std::string(name) + " at position " + std::to_string(index));
    }
    Tensor& src = loaded.at(std::string(name));
    if (src.shape() != t.shape()) {
      throw FormatError(source + ": tensor " + std::string(name) + " has shape " + shape_string(src.shape()) +
                        ", expected " + shape_string(t.shape()));
    }
    t = std::move(src);
    ++index;
  });
  if (index != order.size()) throw FormatError(source + ": unexpected extra tensors");
  return p;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  detail::write_file_bytes(path, encode_checkpoint(p));
}

inline ModelParams load_checkpoint(const std::string& path, std::size_t cells = FeatureDims::canonical().cells) {
  ModelParams p = decode_checkpoint(detail::read_file_bytes(path), path);
  p.config.cells = cells;
  return p;
}

}  // namespace v7w::qamodel
