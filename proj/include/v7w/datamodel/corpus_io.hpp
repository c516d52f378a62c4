#pragma once

// Canonical corpus document:
//
//   { "images":   [ {"image_id": "...", "width": W, "height": H}, ... ],
//     "qa_pairs": [ {"qa_id", "image_id", "kind", "category", "question",
//                    "answer", "distractors": [3], "groundings": [
//                      {"grounding_id", "name", "box": [x, y, w, h]} ],
//                    "answer_position": 0..3 (optional)}, ... ],
//     "config":   { ... } (optional, ignored) }

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>

#include "json.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"

namespace v7w {

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key + ": missing field");
  return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline int require_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path + ": expected an integer");
  return v.get<int>();
}

inline BoundingBox parse_box(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) throw ParseError(path + ": expected [x, y, w, h]");
  return BoundingBox{require_int(v[0], path + "[0]"), require_int(v[1], path + "[1]"),
                     require_int(v[2], path + "[2]"), require_int(v[3], path + "[3]")};
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

/// Throws ValidationError naming the first offending record.
inline void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> image_ids;
  for (const auto& im : corpus.images) {
    if (im.image_id.empty()) throw ValidationError("image with empty image_id");
    if (im.width <= 0 || im.height <= 0) throw ValidationError("image " + im.image_id + ": non-positive size");
    if (!image_ids.insert(im.image_id).second) throw ValidationError("duplicate image_id " + im.image_id);
  }
  std::unordered_set<std::string> qa_ids;
  for (const auto& rec : corpus.records) {
    const std::string where = "qa_id " + rec.qa_id + ": ";
    if (!qa_ids.insert(rec.qa_id).second) throw ValidationError("duplicate qa_id " + rec.qa_id);
    const ImageInfo* image = corpus.find_image(rec.image_id);
    if (!image) throw ValidationError(where + "unknown image_id " + rec.image_id);
    if ((rec.kind == QAKind::pointing) != (rec.category == Category::which)) {
      throw ValidationError(where + "pointing records must be exactly the 'which' category");
    }
    const std::string q = detail::trim(rec.question);
    if (q.empty() || q.back() != '?') throw ValidationError(where + "question must end with '?'");
    if (rec.answer_position >= kNumCandidates) throw ValidationError(where + "answer_position out of range");
    std::set<std::string> distinct{rec.answer, rec.distractors[0], rec.distractors[1], rec.distractors[2]};
    if (distinct.size() != kNumCandidates) throw ValidationError(where + "candidates must be 4 distinct values");
    std::set<std::string> grounding_ids;
    for (const auto& g : rec.groundings) {
      if (g.name.empty()) throw ValidationError(where + "grounding " + g.grounding_id + " has an empty name");
      if (!grounding_ids.insert(g.grounding_id).second) {
        throw ValidationError(where + "duplicate grounding_id " + g.grounding_id);
      }
      const BoundingBox& b = g.box;
      if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.x + b.w > image->width || b.y + b.h > image->height) {
        throw ValidationError(where + "grounding " + g.grounding_id + " box outside image bounds");
      }
    }
    if (rec.kind == QAKind::pointing) {
      for (const auto& id : rec.candidates()) {
        if (!rec.find_grounding(id)) throw ValidationError(where + "pointing candidate " + id + " has no grounding");
      }
    }
  }
}

inline Corpus corpus_from_json(const nlohmann::json& doc) {
  using detail::require;
  using detail::require_string;
  if (!doc.is_object()) throw ParseError("corpus: expected a top-level object");
  Corpus corpus;
  const auto& images = require(doc, "images", "corpus");
  if (!images.is_array()) throw ParseError("corpus.images: expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "images[" + std::to_string(i) + "]";
    ImageInfo im;
    im.image_id = require_string(images[i], "image_id", path);
    im.width = detail::require_int(require(images[i], "width", path), path + ".width");
    im.height = detail::require_int(require(images[i], "height", path), path + ".height");
    corpus.images.push_back(std::move(im));
  }
  const auto& pairs = require(doc, "qa_pairs", "corpus");
  if (!pairs.is_array()) throw ParseError("corpus.qa_pairs: expected an array");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& obj = pairs[i];
    const std::string path = "qa_pairs[" + std::to_string(i) + "]";
    QARecord rec;
    rec.qa_id = require_string(obj, "qa_id", path);
    rec.image_id = require_string(obj, "image_id", path);
    const std::string kind = require_string(obj, "kind", path);
    auto k = parse_kind(kind);
    if (!k) throw ParseError(path + ".kind: unknown kind '" + kind + "'");
    rec.kind = *k;
    const std::string category = require_string(obj, "category", path);
    auto c = parse_category(category);
    if (!c) throw ParseError(path + ".category: unknown category '" + category + "'");
    rec.category = *c;
    rec.question = require_string(obj, "question", path);
    rec.answer = require_string(obj, "answer", path);
    const auto& distractors = require(obj, "distractors", path);
    if (!distractors.is_array()) throw ParseError(path + ".distractors: expected an array");
    if (distractors.size() != 3) {
      throw ValidationError("qa_id " + rec.qa_id + ": expected exactly 3 distractors, got " +
                            std::to_string(distractors.size()));
    }
    for (std::size_t d = 0; d < 3; ++d) {
      if (!distractors[d].is_string()) throw ParseError(path + ".distractors[" + std::to_string(d) + "]: expected a string");
      rec.distractors[d] = distractors[d].get<std::string>();
    }
    const auto& groundings = require(obj, "groundings", path);
    if (!groundings.is_array()) throw ParseError(path + ".groundings: expected an array");
    for (std::size_t g = 0; g < groundings.size(); ++g) {
      const std::string gpath = path + ".groundings[" + std::to_string(g) + "]";
      ObjectGrounding og;
      og.grounding_id = require_string(groundings[g], "grounding_id", gpath);
      og.name = require_string(groundings[g], "name", gpath);
      og.box = detail::parse_box(require(groundings[g], "box", gpath), gpath + ".box");
      rec.groundings.push_back(std::move(og));
    }
    if (auto it = obj.find("answer_position"); it != obj.end()) {
      const int pos = detail::require_int(*it, path + ".answer_position");
      if (pos < 0) throw ValidationError("qa_id " + rec.qa_id + ": negative answer_position");
      rec.answer_position = static_cast<std::size_t>(pos);
    } else {
      rec.answer_position = default_answer_position(rec.qa_id);
    }
    corpus.records.push_back(std::move(rec));
  }
  validate_corpus(corpus);
  return corpus;
}

inline Corpus parse_corpus_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corpus: ") + e.what());
  }
  return corpus_from_json(doc);
}

inline Corpus parse_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open corpus file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus_text(buf.str());
}

inline nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json doc;
  doc["images"] = nlohmann::json::array();
  for (const auto& im : corpus.images) {
    doc["images"].push_back({{"image_id", im.image_id}, {"width", im.width}, {"height", im.height}});
  }
  doc["qa_pairs"] = nlohmann::json::array();
  for (const auto& rec : corpus.records) {
    nlohmann::json g = nlohmann::json::array();
    for (const auto& og : rec.groundings) {
      g.push_back({{"grounding_id", og.grounding_id},
                   {"name", og.name},
                   {"box", {og.box.x, og.box.y, og.box.w, og.box.h}}});
    }
    doc["qa_pairs"].push_back({{"qa_id", rec.qa_id},
                               {"image_id", rec.image_id},
                               {"kind", to_string(rec.kind)},
                               {"category", to_string(rec.category)},
                               {"question", rec.question},
                               {"answer", rec.answer},
                               {"distractors", rec.distractors},
                               {"groundings", std::move(g)},
                               {"answer_position", rec.answer_position}});
  }
  return doc;
}

}  // namespace v7w
