#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "v7w/datamodel/text.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/featurestore.hpp"
#include "v7w/numkit/adam.hpp"
#include "v7w/numkit/gradcheck.hpp"
#include "v7w/numkit/ops.hpp"
#include "v7w/qamodel/forward.hpp"
#include "v7w/qamodel/params.hpp"
#include "v7w/rng.hpp"

namespace v7w::qamodel {

/// A record resolved against a vocabulary and its feature pack.
struct Example {
  std::string qa_id;
  QAKind kind = QAKind::telling;
  const FeaturePack* pack = nullptr;
  std::vector<std::size_t> question;  // ends with the "?" index
  std::vector<std::size_t> answer;    // telling: tokens of the correct answer
  std::array<const Tensor*, kNumCandidates> regions{};  // pointing, presentation order
  std::size_t target = 0;                               // pointing: correct slot
};

inline Example make_example(const QARecord& rec, const FeaturePack& pack, const Vocabulary& vocab) {
  Example ex;
  ex.qa_id = rec.qa_id;
  ex.kind = rec.kind;
  ex.pack = &pack;
  ex.question = question_indices(rec, vocab);
  if (rec.kind == QAKind::telling) {
    ex.answer = vocab.encode(tokenize(rec.answer));
    if (ex.answer.empty()) throw DomainError("qa_id " + rec.qa_id + ": answer has no tokens");
  } else {
    const auto candidates = rec.candidates();
    for (std::size_t i = 0; i < kNumCandidates; ++i) ex.regions[i] = &pack.region(candidates[i]);
  }
  ex.target = rec.answer_position;
  return ex;
}

namespace detail {

/// Backpropagates one step given dL/dh_t and dL/dc_t. Writes dL/dh_{t-1}
/// and dL/dc_{t-1}; accumulates parameter gradients and, for learned
/// attention, dL/d(W_ce C_j) into `d_projected`.
inline void step_backward(const ImageContext& ctx, const ModelParams& p, AttentionMode mode, const StepRecord& st,
                          std::span<const double> dh, std::span<const double> dc, ModelParams& g, Vec& dh_prev,
                          Vec& dc_prev, Tensor& d_projected) {
  const ModelConfig& cfg = p.config;
  const std::size_t H = cfg.hidden;
  const auto& gi = st.cell.gates[kInput];
  const auto& gf = st.cell.gates[kForget];
  const auto& go = st.cell.gates[kOutput];
  const auto& gg = st.cell.gates[kCandidate];

  std::array<Vec, 4> dpre;
  for (auto& d : dpre) d.assign(H, 0.0);
  dc_prev.assign(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    const double tc = std::tanh(st.cell.c[k]);
    const double dct = dc[k] + dh[k] * go[k] * (1.0 - tc * tc);
    dpre[kOutput][k] = dh[k] * tc * go[k] * (1.0 - go[k]);
    dpre[kInput][k] = dct * gg[k] * gi[k] * (1.0 - gi[k]);
    dpre[kForget][k] = dct * st.c_prev[k] * gf[k] * (1.0 - gf[k]);
    dpre[kCandidate][k] = dct * gi[k] * (1.0 - gg[k] * gg[k]);
    dc_prev[k] = dct * gf[k];
  }

  dh_prev.assign(H, 0.0);
  Vec dv(cfg.embed, 0.0), dr(cfg.channels, 0.0);
  for (std::size_t q = 0; q < 4; ++q) {
    outer_acc(g.W_v[q], dpre[q], st.v);
    outer_acc(g.W_h[q], dpre[q], st.h_prev);
    outer_acc(g.W_r[q], dpre[q], st.attention.context);
    axpy(1.0, dpre[q], g.b_gate[q].data());
    gemv_t_acc(p.W_v[q], dpre[q], dv);
    gemv_t_acc(p.W_h[q], dpre[q], dh_prev);
    gemv_t_acc(p.W_r[q], dpre[q], dr);
  }

  if (st.input == kImageInput) {
    outer_acc(g.W_img, dv, ctx.global_feature.data());
    axpy(1.0, dv, g.b_img.data());
  } else {
    for (std::size_t r = 0; r < cfg.embed; ++r) g.W_word(r, st.input) += dv[r];
  }

  if (mode == AttentionMode::uniform) return;

  const std::size_t cells = ctx.cells();
  const std::size_t A = cfg.att_dim;
  const Vec& a = st.attention.weights;
  Vec da(cells);
  double weighted = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    da[j] = dot(dr, ctx.conv_map.row(j));
    weighted += a[j] * da[j];
  }
  Vec du(A, 0.0);
  for (std::size_t j = 0; j < cells; ++j) {
    const double de = a[j] * (da[j] - weighted);
    g.b_a[0] += de;
    const double* z = st.attention.hidden.data() + j * A;
    auto dproj = d_projected.row(j);
    for (std::size_t k = 0; k < A; ++k) {
      g.w_a[k] += de * z[k];
      const double ds = de * p.w_a[k] * (1.0 - z[k] * z[k]);
      du[k] += ds;
      dproj[k] += ds;
    }
  }
  outer_acc(g.W_he, du, st.h_prev);
  gemv_t_acc(p.W_he, du, dh_prev);
}

}  // namespace detail

/// Loss of one example. Telling: mean cross-entropy over the answer tokens
/// and the closing END token. Pointing: cross-entropy of the softmax over
/// the four candidate scores. When `grad` is non-null the example's
/// gradient is added to it.
inline double example_loss(const Example& ex, const ModelParams& p, AttentionMode mode, ModelParams* grad = nullptr) {
  if (!ex.pack) throw DomainError("example " + ex.qa_id + " has no feature pack");
  const auto ctx = ImageContext::make(*ex.pack, p);
  const std::size_t H = p.config.hidden;

  std::vector<std::size_t> inputs = ex.question;
  if (ex.kind == QAKind::telling) {
    if (ex.answer.empty()) throw DomainError("example " + ex.qa_id + ": empty answer");
    inputs.insert(inputs.end(), ex.answer.begin(), ex.answer.end());
  }
  const auto steps = run_sequence(*ctx, p, mode, inputs);
  const std::size_t last_question_step = ex.question.size();

  std::vector<Vec> dh_out;
  if (grad) dh_out.assign(steps.size(), Vec(H, 0.0));
  double loss = 0.0;

  if (ex.kind == QAKind::telling) {
    const std::size_t n = ex.answer.size();
    const double scale = 1.0 / static_cast<double>(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const std::size_t s = last_question_step + k;
      const std::size_t target = k < n ? ex.answer[k] : kEndAnswerIndex;
      if (target >= p.config.vocab) throw IndexError("answer token outside vocabulary in " + ex.qa_id);
      const Vec& h = steps[s].cell.h;
      const Vec logits = output_logits(h, p);
      loss += scale * (log_sum_exp(logits) - logits[target]);
      if (grad) {
        Vec dlogits = softmax_stable(logits);
        dlogits[target] -= 1.0;
        for (double& x : dlogits) x *= scale;
        outer_acc(grad->W_s, dlogits, h);
        axpy(1.0, dlogits, grad->b_s.data());
        gemv_t_acc(p.W_s, dlogits, dh_out[s]);
      }
    }
  } else {
    // The b_p . h term is shared by all four candidates and cancels in the
    // softmax; b_p therefore has an exactly zero gradient here.
    const Vec& h = steps.back().cell.h;
    std::array<Vec, kNumCandidates> proj;
    Vec scores(kNumCandidates);
    for (std::size_t i = 0; i < kNumCandidates; ++i) {
      if (!ex.regions[i]) throw DomainError("example " + ex.qa_id + " is missing a candidate region");
      if (ex.regions[i]->size() != p.config.feature_dim) throw DimensionError("region feature width mismatch in " + ex.qa_id);
      proj[i].assign(H, 0.0);
      gemv_acc(p.W_p, ex.regions[i]->data(), proj[i]);
      scores[i] = dot(proj[i], h);
    }
    loss = log_sum_exp(scores) - scores[ex.target];
    if (grad) {
      Vec ds = softmax_stable(scores);
      ds[ex.target] -= 1.0;
      Vec& dh = dh_out.back();
      Vec scaled_h(H);
      for (std::size_t i = 0; i < kNumCandidates; ++i) {
        axpy(ds[i], proj[i], dh);
        for (std::size_t k = 0; k < H; ++k) scaled_h[k] = ds[i] * h[k];
        outer_acc(grad->W_p, scaled_h, ex.regions[i]->data());
      }
    }
  }

  if (grad) {
    Tensor d_projected({ctx->cells(), p.config.att_dim});
    Vec dh_next(H, 0.0), dc_next(H, 0.0), dh_prev, dc_prev;
    for (std::size_t s = steps.size(); s-- > 0;) {
      Vec dh = dh_out[s];
      axpy(1.0, dh_next, dh);
      detail::step_backward(*ctx, p, mode, steps[s], dh, dc_next, *grad, dh_prev, dc_prev, d_projected);
      dh_next.swap(dh_prev);
      dc_next.swap(dc_prev);
    }
    if (mode == AttentionMode::learned) {
      for (std::size_t j = 0; j < ctx->cells(); ++j) outer_acc(grad->W_ce, d_projected.row(j), ctx->conv_map.row(j));
    }
  }
  return loss;
}

/// Mean example loss over `batch`; adds the mean gradient to `grad` when given.
inline double batch_loss(std::span<const Example> batch, const ModelParams& p, AttentionMode mode,
                         ModelParams* grad = nullptr) {
  if (batch.empty()) throw DomainError("batch_loss: empty batch");
  ModelParams local;
  if (grad) local = ModelParams::zeros(p.config);
  double total = 0.0;
  for (const auto& ex : batch) total += example_loss(ex, p, mode, grad ? &local : nullptr);
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (grad) {
    auto dst = flatten_params(*grad);
    auto src = flatten_params(local);
    for (std::size_t t = 0; t < dst.size(); ++t) axpy(inv, src[t]->data(), dst[t]->data());
  }
  return total * inv;
}

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
  AttentionMode mode = AttentionMode::learned;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Called after each epoch with (epoch index, mean loss); return false to stop.
using EpochCallback = std::function<bool(std::size_t, double)>;

inline TrainResult train(std::span<const Example> examples, ModelParams& params, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (examples.empty()) throw DomainError("train: no examples");
  if (cfg.batch_size == 0) throw DomainError("train: batch size must be positive");
  std::vector<AdamState> states;
  params.for_each([&](std::string_view, Tensor& t) { states.emplace_back(t.shape(), cfg.adam); });
  ModelParams grad = ModelParams::zeros(params.config);
  auto grad_tensors = flatten_params(grad);
  auto param_tensors = flatten_params(params);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(cfg.seed);
  TrainResult result;
  std::vector<Example> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      for (Tensor* t : grad_tensors) t->fill(0.0);
      const double loss = batch_loss(batch, params, cfg.mode, &grad);
      if (!std::isfinite(loss)) {
        throw NumericsError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting " +
                            batch.front().qa_id);
      }
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Tensor* t : grad_tensors) sq += dot(t->data(), t->data());
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          for (Tensor* t : grad_tensors)
            for (double& x : t->data()) x *= cfg.clip_norm / norm;
        }
      }
      for (std::size_t t = 0; t < param_tensors.size(); ++t) adam_step(*param_tensors[t], *grad_tensors[t], states[t]);
      ++result.steps;
      epoch_total += loss * static_cast<double>(end - start);
    }
    const double epoch_loss = epoch_total / static_cast<double>(order.size());
    result.epoch_loss.push_back(epoch_loss);
    if (!params.all_finite()) throw NumericsError("parameters became non-finite at epoch " + std::to_string(epoch));
    if (on_epoch && !on_epoch(epoch, epoch_loss)) break;
  }
  return result;
}

}  // namespace v7w::qamodel
