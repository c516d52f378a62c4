#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "v7w/datamodel/types.hpp"

namespace v7w {

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const long long x0 = std::max(a.x, b.x);
  const long long y0 = std::max(a.y, b.y);
  const long long x1 = std::min(static_cast<long long>(a.x) + a.w, static_cast<long long>(b.x) + b.w);
  const long long y1 = std::min(static_cast<long long>(a.y) + a.h, static_cast<long long>(b.y) + b.h);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  return static_cast<double>((x1 - x0) * (y1 - y0));
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

inline constexpr double kDedupIouThreshold = 0.5;

/// Greedy duplicate removal in input order: a grounding is dropped when an
/// earlier kept grounding has the same name and IoU strictly above 0.5.
inline std::vector<ObjectGrounding> dedup_groundings(std::span<const ObjectGrounding> groundings) {
  std::vector<ObjectGrounding> kept;
  for (const auto& g : groundings) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const ObjectGrounding& k) {
      return k.name == g.name && iou(k.box, g.box) > kDedupIouThreshold;
    });
    if (!duplicate) kept.push_back(g);
  }
  return kept;
}

}  // namespace v7w
