#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"
#include "v7w/rng.hpp"

namespace v7w::baselines {

inline constexpr std::size_t kEmbeddingDim = 200;

struct WordEmbeddingTable {
  enum class Source { loaded_file, fallback };

  std::map<std::string, Tensor> vectors;
  Source source = Source::fallback;
  std::uint64_t seed = 0;

  const Tensor* find(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }

  /// Plain-text table: one token per line followed by 200 floats.
  static WordEmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open embedding table " + path);
    WordEmbeddingTable table;
    table.source = Source::loaded_file;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream fields(line);
      std::string token;
      fields >> token;
      Tensor v({kEmbeddingDim});
      std::size_t n = 0;
      double x;
      while (fields >> x) {
        if (n == kEmbeddingDim) break;
        v[n++] = x;
      }
      const std::string where = path + ":" + std::to_string(line_no);
      if (n != kEmbeddingDim || (fields >> std::ws, !fields.eof())) {
        throw ParseError(where + ": expected token followed by " + std::to_string(kEmbeddingDim) + " numbers");
      }
      if (!v.all_finite()) throw ParseError(where + ": non-finite value");
      if (!table.vectors.emplace(token, std::move(v)).second) throw ParseError(where + ": duplicate token " + token);
    }
    return table;
  }

  /// Vector of a token in the fallback table; depends only on (token, seed).
  static Tensor fallback_vector(const std::string& token, std::uint64_t seed) {
    Rng rng(mix_seed(seed, token));
    Tensor v({kEmbeddingDim});
    for (double& x : v.data()) x = rng.normal() / 10.0;
    return v;
  }

  static WordEmbeddingTable fallback(const std::vector<std::string>& tokens, std::uint64_t seed) {
    WordEmbeddingTable table;
    table.source = Source::fallback;
    table.seed = seed;
    for (const auto& t : tokens) table.vectors.emplace(t, fallback_vector(t, seed));
    return table;
  }
};

/// Mean of the token vectors; tokens missing from the table count as zero
/// vectors.
inline Tensor question_feature(const std::vector<std::string>& tokens, const WordEmbeddingTable& table) {
  Tensor out({kEmbeddingDim});
  if (tokens.empty()) return out;
  for (const auto& t : tokens) {
    if (const Tensor* v = table.find(t)) {
      for (std::size_t i = 0; i < kEmbeddingDim; ++i) out[i] += (*v)[i];
    }
  }
  for (double& x : out.data()) x /= static_cast<double>(tokens.size());
  return out;
}

}  // namespace v7w::baselines
