#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "v7w/datamodel/text.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"
#include "v7w/qamodel/forward.hpp"

namespace v7w::evalkit {

/// Attention weights pooled over time on a square grid, plus the image size
/// used to map cells back to pixels.
struct HeatMap {
  Tensor grid;  // [side x side]
  int width = 1;
  int height = 1;

  std::size_t side() const { return grid.dim(0); }
};

inline std::size_t grid_side(std::size_t cells) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cells))));
  if (side * side != cells) throw DimensionError("attention over " + std::to_string(cells) + " cells is not a square grid");
  return side;
}

/// grid[j] = max over steps of a_t[j], reshaped row-major.
inline HeatMap attention_heatmap(std::span<const std::vector<double>> steps, int width = 1, int height = 1) {
  if (steps.empty()) throw DomainError("attention_heatmap: empty trace");
  const std::size_t cells = steps.front().size();
  const std::size_t side = grid_side(cells);
  HeatMap hm;
  hm.width = width;
  hm.height = height;
  hm.grid = Tensor({side, side});
  for (std::size_t j = 0; j < cells; ++j) hm.grid[j] = steps.front()[j];
  for (const auto& a : steps.subspan(1)) {
    if (a.size() != cells) throw DimensionError("attention_heatmap: steps have different lengths");
    for (std::size_t j = 0; j < cells; ++j) hm.grid[j] = std::max(hm.grid[j], a[j]);
  }
  return hm;
}

inline HeatMap attention_heatmap(const qamodel::AttentionTrace& trace, int width = 1, int height = 1) {
  return attention_heatmap(std::span<const std::vector<double>>(trace.steps), width, height);
}

/// Row-major index of the largest cell, lowest index on ties.
inline std::size_t peak_cell(const HeatMap& hm) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < hm.grid.size(); ++j)
    if (hm.grid[j] > hm.grid[best]) best = j;
  return best;
}

/// Image point at the center of grid cell `j`.
inline std::pair<double, double> cell_center(const HeatMap& hm, std::size_t j) {
  const double side = static_cast<double>(hm.side());
  const double row = static_cast<double>(j / hm.side());
  const double col = static_cast<double>(j % hm.side());
  return {(col + 0.5) / side * hm.width, (row + 0.5) / side * hm.height};
}

struct PeakInBoxReport {
  std::size_t hits = 0;
  std::size_t total = 0;
  double rate = 0.0;
  double mean_box_area_fraction = 0.0;  // over every box considered
};

/// Fraction of heatmaps whose peak cell center lies inside any of the
/// record's boxes.
inline PeakInBoxReport peak_in_box_rate(std::span<const HeatMap> heatmaps,
                                        std::span<const std::vector<BoundingBox>> boxes) {
  if (heatmaps.size() != boxes.size()) throw DimensionError("peak_in_box_rate: heatmaps and box lists differ");
  PeakInBoxReport rep;
  double area_sum = 0.0;
  std::size_t area_count = 0;
  for (std::size_t r = 0; r < heatmaps.size(); ++r) {
    const HeatMap& hm = heatmaps[r];
    const auto [px, py] = cell_center(hm, peak_cell(hm));
    bool hit = false;
    for (const auto& b : boxes[r]) {
      hit |= b.contains(px, py);
      area_sum += b.area() / (static_cast<double>(hm.width) * static_cast<double>(hm.height));
      ++area_count;
    }
    rep.hits += hit ? 1 : 0;
    ++rep.total;
  }
  rep.rate = rep.total ? static_cast<double>(rep.hits) / static_cast<double>(rep.total) : 0.0;
  rep.mean_box_area_fraction = area_count ? area_sum / static_cast<double>(area_count) : 0.0;
  return rep;
}

/// `specific`: the answer's own box (pointing) or the first grounding named
/// in the answer text (telling).  `any_mentioned`: every grounding whose name
/// matches the answer object or appears in the question or answer.
enum class BoxVariant { specific, any_mentioned };

inline std::vector<BoundingBox> answer_boxes(const QARecord& rec, BoxVariant variant) {
  std::vector<BoundingBox> out;
  std::set<std::string> mentioned;
  for (auto& t : tokenize(rec.question)) mentioned.insert(t);
  std::set<std::string> answer_tokens;
  if (rec.kind == QAKind::telling)
    for (auto& t : tokenize(rec.answer)) answer_tokens.insert(t);
  mentioned.insert(answer_tokens.begin(), answer_tokens.end());

  const ObjectGrounding* target = nullptr;
  if (rec.kind == QAKind::pointing) {
    target = rec.find_grounding(rec.answer);
  } else {
    for (const auto& g : rec.groundings) {
      if (answer_tokens.count(g.name)) {
        target = &g;
        break;
      }
    }
  }
  if (variant == BoxVariant::specific) {
    if (target) out.push_back(target->box);
    return out;
  }
  for (const auto& g : rec.groundings) {
    if ((target && g.name == target->name) || mentioned.count(g.name)) out.push_back(g.box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graymap export

/// 3x3 binomial blur (1,2,1) x (1,2,1) / 16 with clamped edges.
inline Tensor binomial_blur(const Tensor& grid) {
  const std::size_t rows = grid.dim(0), cols = grid.dim(1);
  static constexpr double k[3] = {1.0, 2.0, 1.0};
  Tensor out({rows, cols});
  auto clamp = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1)); };
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          s += k[a + 1] * k[b + 1] * grid(clamp(static_cast<long>(i) + a, rows), clamp(static_cast<long>(j) + b, cols));
      out(i, j) = s / 16.0;
    }
  }
  return out;
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Min-max normalization to 0..255 (a constant grid maps to 0), optional
/// blur before normalizing, nearest-neighbor upsampling after.
inline GrayImage heatmap_image(const HeatMap& hm, bool blur, std::size_t upsample = 1) {
  if (upsample < 1) throw DomainError("heatmap upsample factor must be >= 1");
  const Tensor g = blur ? binomial_blur(hm.grid) : hm.grid;
  const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
  const double min = *lo, range = *hi - *lo;
  const std::size_t rows = g.dim(0), cols = g.dim(1);
  GrayImage img;
  img.width = cols * upsample;
  img.height = rows * upsample;
  img.pixels.resize(img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double v = g(y / upsample, x / upsample);
      const double level = range > 0.0 ? std::round(255.0 * (v - min) / range) : 0.0;
      img.pixels[y * img.width + x] = static_cast<std::uint8_t>(level);
    }
  }
  return img;
}

/// Binary graymap (P5).  `comment` lines are written as '#' header lines.
inline void write_pgm(const GrayImage& img, const std::string& path, const std::vector<std::string>& comment = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + path + " for writing");
  out << "P5\n";
  for (const auto& line : comment) out << "# " << line << "\n";
  out << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw StorageError("write failed for " + path);
}

inline void export_heatmap_image(const HeatMap& hm, const std::string& path, bool blur, std::size_t upsample = 1,
                                 const std::vector<std::string>& comment = {}) {
  write_pgm(heatmap_image(hm, blur, upsample), path, comment);
}

}  // namespace v7w::evalkit
