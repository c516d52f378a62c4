#pragma once

#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "v7w/datamodel/text.hpp"
#include "v7w/datamodel/types.hpp"

namespace v7w {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
};

inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

struct CorpusStats {
  std::size_t questions = 0;
  std::size_t telling_answers = 0;
  MeanSd question_length;  // tokens, including the final "?"
  MeanSd answer_length;    // tokens of telling answers
  double long_answer_fraction = 0.0;   // telling answers with > 2 tokens
  double top1000_coverage = 0.0;
  std::array<double, 3> length_histogram{};  // fraction with exactly 1, 2, 3 tokens
};

inline CorpusStats corpus_stats(std::span<const QARecord> records) {
  CorpusStats st;
  std::vector<double> qlen, alen;
  for (const auto& rec : records) {
    qlen.push_back(static_cast<double>(tokenize_question(rec.question).size()));
    if (rec.kind == QAKind::telling) alen.push_back(static_cast<double>(tokenize(rec.answer).size()));
  }
  st.questions = qlen.size();
  st.telling_answers = alen.size();
  st.question_length = mean_sd(qlen);
  st.answer_length = mean_sd(alen);
  if (!alen.empty()) {
    const double n = static_cast<double>(alen.size());
    std::size_t longer = 0;
    std::array<std::size_t, 3> hist{};
    for (double len : alen) {
      if (len > 2) ++longer;
      if (len >= 1 && len <= 3) ++hist[static_cast<std::size_t>(len) - 1];
    }
    st.long_answer_fraction = static_cast<double>(longer) / n;
    for (std::size_t i = 0; i < 3; ++i) st.length_histogram[i] = static_cast<double>(hist[i]) / n;
    st.top1000_coverage = top_k_answers(records, 1000).coverage;
  }
  return st;
}

inline CorpusStats corpus_stats(const Corpus& corpus) { return corpus_stats(corpus.records); }

inline nlohmann::json to_json(const CorpusStats& st) {
  return {{"questions", st.questions},
          {"telling_answers", st.telling_answers},
          {"avg_question_length", st.question_length.mean},
          {"sd_question_length", st.question_length.sd},
          {"avg_answer_length", st.answer_length.mean},
          {"sd_answer_length", st.answer_length.sd},
          {"long_answer_fraction", st.long_answer_fraction},
          {"top1000_answer_coverage", st.top1000_coverage},
          {"answer_length_histogram",
           {{"1", st.length_histogram[0]}, {"2", st.length_histogram[1]}, {"3", st.length_histogram[2]}}}};
}

/// Grounding-name frequencies over training records.
inline std::map<std::string, std::size_t> object_frequencies(std::span<const QARecord> training) {
  std::map<std::string, std::size_t> freq;
  for (const auto& rec : training)
    for (const auto& g : rec.groundings) ++freq[g.name];
  return freq;
}

/// Upper bound 2^(b+1) of the power-of-two bin holding frequency f >= 1.
inline std::size_t frequency_bin_upper(std::size_t f) { return std::size_t{1} << std::bit_width(f); }

/// Categories keyed by bin upper bound: f lands in the bin with
/// 2^b <= f < 2^(b+1).
inline std::map<std::size_t, std::set<std::string>> object_frequency_bins(std::span<const QARecord> training) {
  std::map<std::size_t, std::set<std::string>> bins;
  for (const auto& [name, f] : object_frequencies(training)) bins[frequency_bin_upper(f)].insert(name);
  return bins;
}

}  // namespace v7w
