#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v7w/baselines/embeddings.hpp"
#include "v7w/baselines/kmeans.hpp"
#include "v7w/datamodel/text.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/featurestore.hpp"
#include "v7w/numkit/adam.hpp"
#include "v7w/numkit/ops.hpp"
#include "v7w/rng.hpp"

namespace v7w::baselines {

/// Which slices of the concatenated input are kept; the others are zeroed.
enum class Ablation { question_image, question_only, image_only };

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::question_image: return "question+image";
    case Ablation::question_only: return "question";
    case Ablation::image_only: return "image";
  }
  return "?";
}

inline std::optional<Ablation> parse_ablation(std::string_view s) {
  if (s == "question+image" || s == "both") return Ablation::question_image;
  if (s == "question") return Ablation::question_only;
  if (s == "image") return Ablation::image_only;
  return std::nullopt;
}

/// Input = [global image feature | averaged question embedding].
struct FeatureLayout {
  std::size_t image_dim = 4096;
  std::size_t question_dim = kEmbeddingDim;
  Ablation ablation = Ablation::question_image;

  std::size_t dim() const { return image_dim + question_dim; }
  bool keeps_image() const { return ablation != Ablation::question_only; }
  bool keeps_question() const { return ablation != Ablation::image_only; }
};

inline Tensor logreg_input(const Tensor& image, const Tensor& question, const FeatureLayout& layout) {
  if (image.size() != layout.image_dim || question.size() != layout.question_dim) {
    throw DimensionError("logreg input slices " + shape_string(image.shape()) + " + " + shape_string(question.shape()) +
                         " do not match layout " + std::to_string(layout.image_dim) + " + " +
                         std::to_string(layout.question_dim));
  }
  Tensor x({layout.dim()});
  if (layout.keeps_image())
    for (std::size_t i = 0; i < layout.image_dim; ++i) x[i] = image[i];
  if (layout.keeps_question())
    for (std::size_t i = 0; i < layout.question_dim; ++i) x[layout.image_dim + i] = question[i];
  return x;
}

struct LogRegConfig {
  std::size_t max_classes = 5000;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  std::size_t kmeans_iterations = 20;
  Ablation ablation = Ablation::question_image;
};

struct LogRegModel {
  Tensor weights;  // [K x D]
  Tensor biases;   // [K]
  std::vector<std::string> class_labels;  // telling: normalized answers; pointing: cluster ids
  QAKind task = QAKind::telling;
  FeatureLayout layout;
  Tensor centroids;  // pointing: [K x image_dim]
  std::vector<double> epoch_loss;

  std::size_t classes() const { return weights.dim(0); }

  std::optional<std::size_t> label_index(const std::string& label) const {
    for (std::size_t k = 0; k < class_labels.size(); ++k)
      if (class_labels[k] == label) return k;
    return std::nullopt;
  }
};

inline std::vector<double> logreg_probs(const LogRegModel& m, const Tensor& x) {
  std::vector<double> logits(m.biases.values());
  gemv_acc(m.weights, x.data(), logits);
  return softmax_stable(logits);
}

/// Softmax regression on prepared inputs, zero-initialized and trained by
/// Adam on mean cross-entropy.
inline void logreg_fit(LogRegModel& m, std::span<const Tensor> inputs, std::span<const std::size_t> labels,
                       const LogRegConfig& cfg) {
  if (inputs.empty()) throw DomainError("logreg: empty usable training set");
  if (inputs.size() != labels.size()) throw DimensionError("logreg: inputs and labels differ in length");
  if (cfg.batch_size == 0) throw DomainError("logreg: batch size must be positive");
  const std::size_t K = m.classes();
  const std::size_t D = m.weights.dim(1);
  AdamState sw(m.weights.shape(), cfg.adam), sb(m.biases.shape(), cfg.adam);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(cfg.seed, "logreg"));
  Tensor gw({K, D}), gb({K});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      gw.fill(0.0);
      gb.fill(0.0);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const Tensor& x = inputs[order[b]];
        const std::size_t y = labels[order[b]];
        if (y >= K) throw IndexError("logreg: label " + std::to_string(y) + " outside " + std::to_string(K) + " classes");
        auto p = logreg_probs(m, x);
        total += cross_entropy(p, y);
        p[y] -= 1.0;
        for (double& v : p) v *= inv;
        outer_acc(gw, p, x.data());
        axpy(1.0, p, gb.data());
      }
      adam_step(m.weights, gw, sw);
      adam_step(m.biases, gb, sb);
    }
    const double loss = total / static_cast<double>(order.size());
    if (!std::isfinite(loss)) throw NumericsError("logreg: non-finite loss at epoch " + std::to_string(epoch));
    m.epoch_loss.push_back(loss);
  }
}

inline Tensor record_question_feature(const QARecord& rec, const WordEmbeddingTable& table) {
  return question_feature(tokenize_question(rec.question), table);
}

/// Telling: classes are the most frequent training answers; records whose
/// answer falls outside them are skipped.  Pointing: classes are k-means
/// clusters of the training candidate regions, and each record is labelled
/// with the cluster of its correct region.
inline LogRegModel logreg_train(std::span<const QARecord> training, const PackLookup& packs,
                                const WordEmbeddingTable& table, QAKind task, const LogRegConfig& cfg) {
  std::vector<QARecord> usable_records;
  for (const auto& rec : training)
    if (rec.kind == task) usable_records.push_back(rec);
  if (usable_records.empty()) throw DomainError("logreg: no training records of kind " + std::string(to_string(task)));

  LogRegModel m;
  m.task = task;
  m.layout.image_dim = packs(usable_records.front().image_id).global_feature.size();
  m.layout.ablation = cfg.ablation;

  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;
  if (task == QAKind::telling) {
    m.class_labels = top_k_answers(usable_records, cfg.max_classes).answers;
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < m.class_labels.size(); ++k) index.emplace(m.class_labels[k], k);
    for (const auto& rec : usable_records) {
      auto it = index.find(normalize_answer(rec.answer));
      if (it == index.end()) continue;
      inputs.push_back(logreg_input(packs(rec.image_id).global_feature, record_question_feature(rec, table), m.layout));
      labels.push_back(it->second);
    }
  } else {
    std::vector<Tensor> regions;
    std::map<std::pair<std::string, std::string>, std::size_t> region_index;
    std::vector<std::size_t> correct;
    for (const auto& rec : usable_records) {
      const FeaturePack& pack = packs(rec.image_id);
      for (const auto& id : rec.candidates()) {
        auto key = std::make_pair(rec.image_id, id);
        if (!region_index.count(key)) {
          region_index.emplace(key, regions.size());
          regions.push_back(pack.region(id));
        }
      }
      correct.push_back(region_index.at({rec.image_id, rec.answer}));
    }
    const std::size_t K = std::min(cfg.max_classes, regions.size());
    KMeansModel km = kmeans_fit(regions, K, cfg.kmeans_iterations, mix_seed(cfg.seed, "kmeans"));
    m.centroids = km.centroids;
    for (std::size_t k = 0; k < K; ++k) m.class_labels.push_back("cluster-" + std::to_string(k));
    for (std::size_t r = 0; r < usable_records.size(); ++r) {
      const auto& rec = usable_records[r];
      inputs.push_back(logreg_input(packs(rec.image_id).global_feature, record_question_feature(rec, table), m.layout));
      labels.push_back(km.assignment[correct[r]]);
    }
  }
  if (inputs.empty()) throw DomainError("logreg: empty usable training set");
  m.weights = Tensor({m.class_labels.size(), m.layout.dim()});
  m.biases = Tensor({m.class_labels.size()});
  logreg_fit(m, inputs, labels, cfg);
  return m;
}

/// Telling: highest class probability among the candidates, candidates
/// outside the label set scoring -inf (index 0 when all are outside).
/// Pointing: the candidate region nearest to the predicted cluster's centroid.
inline std::size_t logreg_predict(const QARecord& rec, const FeaturePack& pack, const LogRegModel& m,
                                  const WordEmbeddingTable& table) {
  if (rec.kind != m.task) throw DomainError("qa_id " + rec.qa_id + ": record kind does not match the model task");
  const Tensor x = logreg_input(pack.global_feature, record_question_feature(rec, table), m.layout);
  const auto probs = logreg_probs(m, x);
  const auto candidates = rec.candidates();
  std::array<double, kNumCandidates> scores{};
  if (rec.kind == QAKind::telling) {
    for (std::size_t i = 0; i < kNumCandidates; ++i) {
      const auto k = m.label_index(normalize_answer(candidates[i]));
      scores[i] = k ? probs[*k] : -std::numeric_limits<double>::infinity();
    }
  } else {
    std::size_t cluster = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[cluster]) cluster = k;
    for (std::size_t i = 0; i < kNumCandidates; ++i)
      scores[i] = -squared_distance(m.centroids.row(cluster), pack.region(candidates[i]).data());
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumCandidates; ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace v7w::baselines
