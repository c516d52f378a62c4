#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/rng.hpp"

namespace v7w {

enum class QAKind { telling, pointing };

enum class Category { what, where, when, who, why, how, which };

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::what, Category::where, Category::when, Category::who,
    Category::why,  Category::how,   Category::which};

inline constexpr std::size_t kNumCandidates = 4;

inline std::string_view to_string(QAKind kind) { return kind == QAKind::telling ? "telling" : "pointing"; }

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::what: return "what";
    case Category::where: return "where";
    case Category::when: return "when";
    case Category::who: return "who";
    case Category::why: return "why";
    case Category::how: return "how";
    case Category::which: return "which";
  }
  return "?";
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline std::optional<QAKind> parse_kind(std::string_view s) {
  if (s == "telling") return QAKind::telling;
  if (s == "pointing") return QAKind::pointing;
  return std::nullopt;
}

/// Pixel box with top-left corner (x, y).
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  double area() const { return static_cast<double>(w) * static_cast<double>(h); }
  bool contains(double px, double py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ObjectGrounding {
  std::string grounding_id;
  std::string name;
  BoundingBox box;
};

struct ImageInfo {
  std::string image_id;
  int width = 0;
  int height = 0;
};

struct QARecord {
  std::string qa_id;
  std::string image_id;
  QAKind kind = QAKind::telling;
  Category category = Category::what;
  std::string question;
  /// Answer text (telling) or grounding id (pointing).
  std::string answer;
  std::array<std::string, 3> distractors;
  std::vector<ObjectGrounding> groundings;
  /// Position of the answer among the presented candidates.
  std::size_t answer_position = 0;

  /// Candidates in presentation order: the distractors in their listed
  /// order with the answer inserted at answer_position.
  std::array<std::string, kNumCandidates> candidates() const {
    std::array<std::string, kNumCandidates> out;
    std::size_t d = 0;
    for (std::size_t i = 0; i < kNumCandidates; ++i) out[i] = (i == answer_position) ? answer : distractors[d++];
    return out;
  }

  const ObjectGrounding* find_grounding(std::string_view id) const {
    for (const auto& g : groundings)
      if (g.grounding_id == id) return &g;
    return nullptr;
  }
};

/// Presentation slot used when a corpus file omits answer_position.
inline std::size_t default_answer_position(std::string_view qa_id) {
  return static_cast<std::size_t>(fnv1a(qa_id) % kNumCandidates);
}

struct Corpus {
  std::vector<ImageInfo> images;
  std::vector<QARecord> records;

  const ImageInfo* find_image(std::string_view id) const {
    for (const auto& im : images)
      if (im.image_id == id) return &im;
    return nullptr;
  }
};

enum class Split { train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

}  // namespace v7w
