#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "v7w/datamodel/stats.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"

namespace v7w::evalkit {

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t errors = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  void add(bool ok, bool failed) {
    ++total;
    correct += ok ? 1 : 0;
    errors += failed ? 1 : 0;
  }
};

struct Outcome {
  std::string qa_id;
  std::optional<std::size_t> chosen;  // empty when the predictor failed
  bool correct = false;
};

struct RecordError {
  std::string qa_id;
  std::string message;
};

/// Multiple-choice accuracies.  A record whose prediction throws counts as
/// wrong and is listed in `errors`.
struct EvalReport {
  std::string method = "model";
  std::map<Category, Tally> by_category;
  Tally telling;
  Tally pointing;
  Tally overall;
  std::vector<Outcome> outcomes;  // input order
  std::vector<RecordError> errors;

  double accuracy(Category c) const {
    auto it = by_category.find(c);
    return it == by_category.end() ? 0.0 : it->second.accuracy();
  }
};

using Predictor = std::function<std::size_t(const QARecord&)>;

inline EvalReport evaluate(std::span<const QARecord> records, const Predictor& predict, std::string method = "model") {
  EvalReport rep;
  rep.method = std::move(method);
  for (const auto& rec : records) {
    Outcome out;
    out.qa_id = rec.qa_id;
    bool failed = false;
    try {
      const std::size_t chosen = predict(rec);
      if (chosen >= kNumCandidates) throw IndexError("predicted candidate " + std::to_string(chosen) + " out of range");
      out.chosen = chosen;
      out.correct = chosen == rec.answer_position;
    } catch (const std::exception& e) {
      failed = true;
      rep.errors.push_back({rec.qa_id, e.what()});
    }
    rep.by_category[rec.category].add(out.correct, failed);
    (rec.kind == QAKind::telling ? rep.telling : rep.pointing).add(out.correct, failed);
    rep.overall.add(out.correct, failed);
    rep.outcomes.push_back(std::move(out));
  }
  return rep;
}

/// Rows and columns follow the usual 7W results table: one row per method,
/// one column per category, then the telling, pointing and overall means.
inline nlohmann::json table_row(const EvalReport& rep) {
  nlohmann::json row;
  row["method"] = rep.method;
  for (Category c : kAllCategories) {
    auto it = rep.by_category.find(c);
    row[std::string(to_string(c))] = it == rep.by_category.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second.accuracy());
  }
  row["telling"] = rep.telling.total ? nlohmann::json(rep.telling.accuracy()) : nlohmann::json(nullptr);
  row["pointing"] = rep.pointing.total ? nlohmann::json(rep.pointing.accuracy()) : nlohmann::json(nullptr);
  row["overall"] = rep.overall.accuracy();
  return row;
}

inline nlohmann::json to_json(std::span<const EvalReport> reports) {
  nlohmann::json doc;
  nlohmann::json columns = nlohmann::json::array({"method"});
  for (Category c : kAllCategories) columns.push_back(std::string(to_string(c)));
  for (const char* c : {"telling", "pointing", "overall"}) columns.push_back(c);
  doc["columns"] = columns;
  doc["rows"] = nlohmann::json::array();
  doc["counts"] = nlohmann::json::object();
  doc["errors"] = nlohmann::json::array();
  for (const auto& rep : reports) {
    doc["rows"].push_back(table_row(rep));
    nlohmann::json counts;
    for (Category c : kAllCategories) {
      auto it = rep.by_category.find(c);
      const Tally t = it == rep.by_category.end() ? Tally{} : it->second;
      counts[std::string(to_string(c))] = {{"correct", t.correct}, {"total", t.total}, {"errors", t.errors}};
    }
    counts["telling"] = {{"correct", rep.telling.correct}, {"total", rep.telling.total}};
    counts["pointing"] = {{"correct", rep.pointing.correct}, {"total", rep.pointing.total}};
    counts["overall"] = {{"correct", rep.overall.correct}, {"total", rep.overall.total}, {"errors", rep.overall.errors}};
    doc["counts"][rep.method] = counts;
    for (const auto& e : rep.errors) doc["errors"].push_back({{"method", rep.method}, {"qa_id", e.qa_id}, {"message", e.message}});
  }
  return doc;
}

inline nlohmann::json to_json(const EvalReport& rep) { return to_json(std::span(&rep, 1)); }

/// Plurality of five responses in 0..3, lowest index on ties.
inline std::size_t majority_vote(std::span<const std::size_t> responses) {
  if (responses.size() != 5) {
    throw DomainError("majority_vote needs exactly 5 responses, got " + std::to_string(responses.size()));
  }
  std::array<std::size_t, kNumCandidates> votes{};
  for (std::size_t r : responses) {
    if (r >= kNumCandidates) throw DomainError("majority_vote: response " + std::to_string(r) + " outside 0..3");
    ++votes[r];
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumCandidates; ++i)
    if (votes[i] > votes[best]) best = i;
  return best;
}

/// The grounding a pointing record's answer refers to.
inline const ObjectGrounding* answer_object(const QARecord& rec) {
  return rec.kind == QAKind::pointing ? rec.find_grounding(rec.answer) : nullptr;
}

/// Mean accuracy of pointing records per object-frequency bin.  Bins with
/// no evaluated record are left out.
inline std::map<std::size_t, double> accuracy_by_frequency_bin(
    std::span<const QARecord> records, std::span<const Outcome> outcomes,
    const std::map<std::size_t, std::set<std::string>>& bins) {
  if (records.size() != outcomes.size()) throw DimensionError("accuracy_by_frequency_bin: records and outcomes differ");
  std::map<std::string, std::size_t> bin_of;
  for (const auto& [upper, names] : bins)
    for (const auto& n : names) bin_of[n] = upper;
  std::map<std::size_t, Tally> tallies;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ObjectGrounding* g = answer_object(records[i]);
    if (!g) continue;
    auto it = bin_of.find(g->name);
    if (it == bin_of.end()) continue;
    tallies[it->second].add(outcomes[i].correct, !outcomes[i].chosen);
  }
  std::map<std::size_t, double> out;
  for (const auto& [upper, t] : tallies) out[upper] = t.accuracy();
  return out;
}

}  // namespace v7w::evalkit
