#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"

namespace v7w {

/// Lowercases ASCII letters, splits on whitespace, and emits every ASCII
/// punctuation character as its own token. Bytes >= 0x80 are word bytes.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 0x80 && std::ispunct(ch)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
    }
  }
  flush();
  return tokens;
}

/// Tokens of a question with "?" guaranteed to be the final token.
inline std::vector<std::string> tokenize_question(std::string_view text) {
  auto tokens = tokenize(text);
  if (tokens.empty() || tokens.back() != "?") tokens.emplace_back("?");
  return tokens;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Canonical form of an answer string, used as the answer's class label.
inline std::string normalize_answer(std::string_view text) { return join_tokens(tokenize(text)); }

inline bool is_punctuation_token(std::string_view token) {
  return token.size() == 1 && static_cast<unsigned char>(token[0]) < 0x80 &&
         std::ispunct(static_cast<unsigned char>(token[0]));
}

inline constexpr std::size_t kUnkIndex = 0;
inline constexpr std::size_t kEndAnswerIndex = 1;
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEndAnswerToken = "<end>";

class Vocabulary {
 public:
  Vocabulary() {
    add(std::string(kUnkToken));
    add(std::string(kEndAnswerToken));
  }

  /// Rebuilds from an ordered token list whose first two entries are the
  /// reserved tokens.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2 || tokens[0] != kUnkToken || tokens[1] != kEndAnswerToken) {
      throw ValidationError("vocabulary must start with the reserved tokens");
    }
    Vocabulary v;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      if (v.contains(tokens[i])) throw ValidationError("duplicate vocabulary token '" + tokens[i] + "'");
      v.add(tokens[i]);
    }
    return v;
  }

  std::size_t size() const noexcept { return index_to_token_.size(); }
  bool contains(std::string_view token) const { return token_to_index_.count(std::string(token)) != 0; }

  /// Index of `token`, or the UNK index.
  std::size_t index(std::string_view token) const {
    auto it = token_to_index_.find(std::string(token));
    return it == token_to_index_.end() ? kUnkIndex : it->second;
  }

  const std::string& token(std::size_t index) const {
    if (index >= index_to_token_.size()) throw IndexError("token index " + std::to_string(index) + " out of range");
    return index_to_token_[index];
  }

  const std::vector<std::string>& tokens() const noexcept { return index_to_token_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(index(t));
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot write vocabulary " + path);
    for (const auto& t : index_to_token_) out << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read vocabulary " + path);
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) tokens.push_back(line);
    }
    return from_tokens(tokens);
  }

 private:
  void add(std::string token) {
    token_to_index_.emplace(token, index_to_token_.size());
    index_to_token_.push_back(std::move(token));
  }

  std::unordered_map<std::string, std::size_t> token_to_index_;
  std::vector<std::string> index_to_token_;
};

/// Tokens of training questions and telling answers with frequency >=
/// min_count, ordered by (frequency desc, token asc) after the reserved pair.
inline Vocabulary build_vocab(std::span<const QARecord> training, std::size_t min_count = 1) {
  if (min_count < 1) throw DomainError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& rec : training) {
    for (auto& t : tokenize_question(rec.question)) ++counts[t];
    if (rec.kind == QAKind::telling) {
      for (const auto& cand : rec.candidates())
        for (auto& t : tokenize(cand)) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != kUnkToken && tok != kEndAnswerToken) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens{std::string(kUnkToken), std::string(kEndAnswerToken)};
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocabulary::from_tokens(tokens);
}

struct TopAnswers {
  std::vector<std::string> answers;  // normalized, most frequent first
  double coverage = 0.0;             // fraction of telling answers covered
};

inline TopAnswers top_k_answers(std::span<const QARecord> training, std::size_t k) {
  if (k < 1) throw DomainError("top_k_answers: k must be >= 1");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& rec : training) {
    if (rec.kind != QAKind::telling) continue;
    ++counts[normalize_answer(rec.answer)];
    ++total;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  TopAnswers out;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    out.answers.push_back(ranked[i].first);
    covered += ranked[i].second;
  }
  out.coverage = total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
  return out;
}

}  // namespace v7w
