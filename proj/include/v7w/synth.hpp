#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "v7w/datamodel/corpus_io.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/featurestore.hpp"

namespace v7w {

/// Tiny closed-world corpus: four objects, one fixed question template per
/// category, four answer options per telling category.  Every image is a
/// 448x448 canvas split into four 224x224 quadrants, one object each.
namespace synth {

inline constexpr std::array<const char*, 4> kObjects = {"cat", "dog", "bus", "cup"};
inline constexpr int kImageSide = 448;

struct TellingTemplate {
  Category category;
  const char* prefix;
  const char* suffix;
  std::array<const char*, 4> options;
};

inline const std::array<TellingTemplate, 6>& telling_templates() {
  static const std::array<TellingTemplate, 6> t = {{
      {Category::what, "what color is the ", " ?", {"red", "blue", "green", "white"}},
      {Category::where, "where is the ", " ?", {"on table", "in kitchen", "at beach", "near window"}},
      {Category::when, "when is the ", " ?", {"at night", "in morning", "at noon", "in evening"}},
      {Category::who, "who is near the ", " ?", {"a man", "a woman", "a child", "a chef"}},
      {Category::why, "why is the ", " ?", {"to eat", "to play", "to rest", "to work"}},
      {Category::how, "how many ", " ?", {"one", "two", "three", "four"}},
  }};
  return t;
}

inline const TellingTemplate& template_for(Category c) {
  for (const auto& t : telling_templates())
    if (t.category == c) return t;
  throw DomainError("no telling template for category " + std::string(to_string(c)));
}

}  // namespace synth

enum class TaskFilter { telling, pointing, both };

inline std::string_view to_string(TaskFilter t) {
  switch (t) {
    case TaskFilter::telling: return "telling";
    case TaskFilter::pointing: return "pointing";
    case TaskFilter::both: return "both";
  }
  return "?";
}

inline std::optional<TaskFilter> parse_task(std::string_view s) {
  if (s == "telling") return TaskFilter::telling;
  if (s == "pointing") return TaskFilter::pointing;
  if (s == "both") return TaskFilter::both;
  return std::nullopt;
}

inline bool task_accepts(TaskFilter t, QAKind kind) {
  return t == TaskFilter::both || (t == TaskFilter::telling) == (kind == QAKind::telling);
}

struct SynthOptions {
  std::size_t count = 64;
  std::uint64_t seed = 0;
  TaskFilter task = TaskFilter::both;
};

/// Records are laid out so that categories, answer positions and (for
/// telling) the correct option cycle evenly: record i takes category
/// i mod C, position (i / C) mod 4 and option (i / 4C) mod 4.  The seed only
/// picks the object each question is about.
inline Corpus synth_corpus(const SynthOptions& opt) {
  std::vector<Category> cats;
  if (opt.task != TaskFilter::pointing)
    for (const auto& t : synth::telling_templates()) cats.push_back(t.category);
  if (opt.task != TaskFilter::telling) cats.push_back(Category::which);

  Rng rng(mix_seed(opt.seed, "synth-corpus"));
  Corpus corpus;
  const std::size_t ncat = cats.size();
  for (std::size_t i = 0; i < opt.count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", i + 1);
    const std::string image_id = std::string("img-") + buf;
    const std::string qa_id = std::string("qa-") + buf;
    corpus.images.push_back({image_id, synth::kImageSide, synth::kImageSide});

    QARecord rec;
    rec.qa_id = qa_id;
    rec.image_id = image_id;
    rec.category = cats[i % ncat];
    rec.kind = rec.category == Category::which ? QAKind::pointing : QAKind::telling;
    rec.answer_position = (i / ncat) % kNumCandidates;
    const int half = synth::kImageSide / 2;
    for (std::size_t q = 0; q < 4; ++q) {
      ObjectGrounding g;
      g.grounding_id = image_id + "-g" + std::to_string(q);
      g.name = synth::kObjects[q];
      g.box = {static_cast<int>(q % 2) * half, static_cast<int>(q / 2) * half, half, half};
      rec.groundings.push_back(g);
    }
    const std::size_t object = rng.below(4);
    const std::string name = synth::kObjects[object];
    if (rec.kind == QAKind::pointing) {
      rec.question = "which is the " + name + " ?";
      rec.answer = rec.groundings[object].grounding_id;
      std::size_t d = 0;
      for (std::size_t q = 0; q < 4; ++q)
        if (q != object) rec.distractors[d++] = rec.groundings[q].grounding_id;
    } else {
      const auto& t = synth::template_for(rec.category);
      rec.question = std::string(t.prefix) + name + t.suffix;
      const std::size_t option = (i / (kNumCandidates * ncat)) % 4;
      rec.answer = t.options[option];
      std::size_t d = 0;
      for (std::size_t o = 0; o < 4; ++o)
        if (o != option) rec.distractors[d++] = t.options[o];
    }
    corpus.records.push_back(std::move(rec));
  }
  validate_corpus(corpus);
  return corpus;
}

/// Class carried by a planted pack: the option index of the correct telling
/// answer, or the slot of the correct pointing candidate.
inline std::size_t planted_class(const QARecord& rec) {
  if (rec.kind == QAKind::pointing) return rec.answer_position;
  const auto& t = synth::template_for(rec.category);
  for (std::size_t o = 0; o < t.options.size(); ++o)
    if (rec.answer == t.options[o]) return o;
  throw DomainError("qa_id " + rec.qa_id + ": answer is not a synthetic option");
}

/// Pack for the record's image.  Pointing packs store one region per
/// candidate; with `planted` the correct region also carries the marker.
inline FeaturePack synth_pack_for(const QARecord& rec, std::uint64_t seed, bool planted,
                                  const FeatureDims& dims = FeatureDims::canonical()) {
  std::vector<std::string> regions;
  if (rec.kind == QAKind::pointing) {
    const auto c = rec.candidates();
    regions.assign(c.begin(), c.end());
  }
  std::optional<std::size_t> signal;
  if (planted) signal = planted_class(rec);
  return synth_feature_pack(rec.image_id, seed, signal, regions, dims);
}

/// One pack per image, keyed by image_id.  Synthetic corpora hold one record
/// per image.
inline std::map<std::string, FeaturePack> synth_packs(const Corpus& corpus, std::uint64_t seed, bool planted,
                                                      const FeatureDims& dims = FeatureDims::canonical()) {
  std::map<std::string, FeaturePack> packs;
  for (const auto& rec : corpus.records) {
    if (packs.count(rec.image_id)) throw DomainError("synthetic packs need one record per image");
    packs.emplace(rec.image_id, synth_pack_for(rec, seed, planted, dims));
  }
  return packs;
}

}  // namespace v7w
