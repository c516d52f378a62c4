#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/rng.hpp"

namespace v7w {

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// 50/20/30 with half-up rounding: round(0.5n) train, round(0.2n) val,
/// remainder test.
inline SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = (n + 1) / 2;
  s.val = (2 * n + 5) / 10;
  if (s.train + s.val > n) s.val = n - s.train;
  s.test = n - s.train - s.val;
  return s;
}

struct SplitAssignment {
  std::map<std::string, Split> by_qa_id;
  std::uint64_t seed = 0;

  Split of(const std::string& qa_id) const {
    auto it = by_qa_id.find(qa_id);
    if (it == by_qa_id.end()) throw IndexError("qa_id " + qa_id + " has no split");
    return it->second;
  }

  std::vector<QARecord> select(const Corpus& corpus, Split which) const {
    std::vector<QARecord> out;
    for (const auto& rec : corpus.records)
      if (of(rec.qa_id) == which) out.push_back(rec);
    return out;
  }

  std::size_t count(Split which) const {
    std::size_t n = 0;
    for (const auto& [id, s] : by_qa_id) n += (s == which);
    return n;
  }
};

/// Shuffles qa_ids (corpus order) with a Fisher-Yates pass driven by
/// mt19937_64(seed), then slices train/val/test per split_sizes.
inline SplitAssignment make_splits(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.records.empty()) throw DomainError("make_splits: empty corpus");
  std::vector<std::string> ids;
  ids.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) ids.push_back(rec.qa_id);
  Rng rng(seed);
  rng.shuffle(ids);
  const SplitSizes sizes = split_sizes(ids.size());
  SplitAssignment out;
  out.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Split s = i < sizes.train ? Split::train : (i < sizes.train + sizes.val ? Split::val : Split::test);
    out.by_qa_id.emplace(ids[i], s);
  }
  return out;
}

/// Lines "qa_id<TAB>split"; lines starting with '#' are comments.
inline void write_splits(const SplitAssignment& splits, const std::string& path,
                         const std::vector<std::string>& header_comments = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StorageError("cannot write splits file " + path);
  for (const auto& line : header_comments) out << "# " << line << '\n';
  for (const auto& [id, s] : splits.by_qa_id) out << id << '\t' << to_string(s) << '\n';
}

inline SplitAssignment read_splits(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read splits file " + path);
  SplitAssignment out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ":" + std::to_string(line_no) + ": missing tab");
    auto s = parse_split(line.substr(tab + 1));
    if (!s) throw ParseError(path + ":" + std::to_string(line_no) + ": unknown split name");
    if (!out.by_qa_id.emplace(line.substr(0, tab), *s).second) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate qa_id");
    }
  }
  return out;
}

}  // namespace v7w
