#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "v7w/datamodel/text.hpp"
#include "v7w/datamodel/types.hpp"
#include "v7w/error.hpp"
#include "v7w/featurestore.hpp"
#include "v7w/numkit/ops.hpp"
#include "v7w/qamodel/params.hpp"

namespace v7w::qamodel {

using Vec = std::vector<double>;

/// Per-step attention weights recorded during a forward pass.
struct AttentionTrace {
  std::vector<Vec> steps;
};

/// Conv map of one image plus its attention projection W_ce * C(I), which
/// is reused at every step.
struct ImageContext {
  Tensor global_feature;
  Tensor conv_map;   // [cells x channels]
  Tensor projected;  // [cells x att_dim]
  Vec mean_row;      // uniform-attention context

  static std::shared_ptr<const ImageContext> make(const FeaturePack& pack, const ModelParams& p) {
    const ModelConfig& cfg = p.config;
    if (pack.global_feature.size() != cfg.feature_dim) {
      throw DimensionError("global feature has " + std::to_string(pack.global_feature.size()) +
                           " entries, model expects " + std::to_string(cfg.feature_dim));
    }
    if (pack.conv_map.rank() != 2 || pack.conv_map.dim(1) != cfg.channels) {
      throw DimensionError("conv map " + shape_string(pack.conv_map.shape()) + " does not have " +
                           std::to_string(cfg.channels) + " channels");
    }
    auto ctx = std::make_shared<ImageContext>();
    ctx->global_feature = pack.global_feature;
    ctx->conv_map = pack.conv_map;
    const std::size_t cells = pack.conv_map.dim(0);
    ctx->projected = Tensor({cells, cfg.att_dim});
    for (std::size_t j = 0; j < cells; ++j) gemv_acc(p.W_ce, pack.conv_map.row(j), ctx->projected.row(j));
    ctx->mean_row.assign(cfg.channels, 0.0);
    for (std::size_t j = 0; j < cells; ++j) axpy(1.0, pack.conv_map.row(j), ctx->mean_row);
    for (double& x : ctx->mean_row) x /= static_cast<double>(cells);
    return ctx;
  }

  std::size_t cells() const { return conv_map.dim(0); }
};

struct AttentionOutput {
  Vec weights;  // a_t, one per cell
  Vec context;  // r_t
  Vec hidden;   // tanh(W_he h + W_ce C_j) per cell, row-major [cells x att]; empty in uniform mode
};

inline AttentionOutput attend(const ImageContext& ctx, std::span<const double> h_prev, const ModelParams& p,
                              AttentionMode mode) {
  const std::size_t cells = ctx.cells();
  const std::size_t att = p.config.att_dim;
  AttentionOutput out;
  if (mode == AttentionMode::uniform) {
    out.weights.assign(cells, 1.0 / static_cast<double>(cells));
    out.context = ctx.mean_row;
    return out;
  }
  Vec u(att, 0.0);
  gemv_acc(p.W_he, h_prev, u);
  out.hidden.resize(cells * att);
  // b_a shifts every cell's score equally and cancels in the softmax, so it
  // is left out of the logits.
  Vec scores(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    const auto pj = ctx.projected.row(j);
    double e = 0.0;
    double* z = out.hidden.data() + j * att;
    for (std::size_t k = 0; k < att; ++k) {
      z[k] = std::tanh(u[k] + pj[k]);
      e += p.w_a[k] * z[k];
    }
    scores[j] = e;
  }
  out.weights = softmax_stable(scores);
  out.context.assign(p.config.channels, 0.0);
  for (std::size_t j = 0; j < cells; ++j) axpy(out.weights[j], ctx.conv_map.row(j), out.context);
  return out;
}

/// Attention weights and context for one step, from the previous hidden
/// state and the image's conv map.
inline AttentionOutput attention_step(std::span<const double> h_prev, const Tensor& conv_map, const ModelParams& p,
                                      AttentionMode mode) {
  if (h_prev.size() != p.config.hidden) throw DimensionError("attention_step: hidden state has wrong length");
  if (conv_map.rank() != 2 || conv_map.dim(1) != p.config.channels) {
    throw DimensionError("attention_step: conv map " + shape_string(conv_map.shape()) + " vs " +
                         std::to_string(p.config.channels) + " channels");
  }
  FeaturePack tmp;
  tmp.global_feature = Tensor({p.config.feature_dim});
  tmp.conv_map = conv_map;
  return attend(*ImageContext::make(tmp, p), h_prev, p, mode);
}

struct CellOutput {
  Vec h;
  Vec c;
  std::array<Vec, 4> gates;  // post-activation i, f, o, g
};

inline CellOutput lstm_step(std::span<const double> v, std::span<const double> h_prev, std::span<const double> c_prev,
                            std::span<const double> r, const ModelParams& p) {
  const ModelConfig& cfg = p.config;
  if (v.size() != cfg.embed || h_prev.size() != cfg.hidden || c_prev.size() != cfg.hidden || r.size() != cfg.channels) {
    throw DimensionError("lstm_step: input lengths (v " + std::to_string(v.size()) + ", h " +
                         std::to_string(h_prev.size()) + ", c " + std::to_string(c_prev.size()) + ", r " +
                         std::to_string(r.size()) + ") do not match the model config");
  }
  CellOutput out;
  for (std::size_t g = 0; g < 4; ++g) {
    Vec pre(p.b_gate[g].values());
    gemv_acc(p.W_v[g], v, pre);
    gemv_acc(p.W_h[g], h_prev, pre);
    gemv_acc(p.W_r[g], r, pre);
    for (double& x : pre) x = (g == kCandidate) ? std::tanh(x) : sigmoid(x);
    out.gates[g] = std::move(pre);
  }
  out.c.resize(cfg.hidden);
  out.h.resize(cfg.hidden);
  for (std::size_t k = 0; k < cfg.hidden; ++k) {
    out.c[k] = out.gates[kForget][k] * c_prev[k] + out.gates[kInput][k] * out.gates[kCandidate][k];
    out.h[k] = out.gates[kOutput][k] * std::tanh(out.c[k]);
  }
  return out;
}

inline constexpr std::size_t kImageInput = std::numeric_limits<std::size_t>::max();

/// Everything the backward pass needs from one recurrent step.
struct StepRecord {
  std::size_t input = kImageInput;  // token index, or kImageInput
  Vec v, h_prev, c_prev;
  AttentionOutput attention;
  CellOutput cell;
};

inline Vec embed_image(const ImageContext& ctx, const ModelParams& p) {
  Vec v(p.b_img.values());
  gemv_acc(p.W_img, ctx.global_feature.data(), v);
  return v;
}

inline Vec embed_token(std::size_t token, const ModelParams& p) {
  if (token >= p.config.vocab) {
    throw IndexError("token index " + std::to_string(token) + " outside vocabulary of " +
                     std::to_string(p.config.vocab));
  }
  Vec v(p.config.embed);
  for (std::size_t r = 0; r < p.config.embed; ++r) v[r] = p.W_word(r, token);
  return v;
}

/// Runs one step: attention from h_prev, then the cell update.
inline StepRecord advance(const ImageContext& ctx, const ModelParams& p, AttentionMode mode, std::size_t input,
                          std::span<const double> h_prev, std::span<const double> c_prev) {
  StepRecord st;
  st.input = input;
  st.v = input == kImageInput ? embed_image(ctx, p) : embed_token(input, p);
  st.h_prev.assign(h_prev.begin(), h_prev.end());
  st.c_prev.assign(c_prev.begin(), c_prev.end());
  st.attention = attend(ctx, st.h_prev, p, mode);
  st.cell = lstm_step(st.v, st.h_prev, st.c_prev, st.attention.context, p);
  return st;
}

/// Image step followed by `tokens`, from zero states.
inline std::vector<StepRecord> run_sequence(const ImageContext& ctx, const ModelParams& p, AttentionMode mode,
                                            std::span<const std::size_t> tokens) {
  std::vector<StepRecord> steps;
  steps.reserve(tokens.size() + 1);
  Vec h(p.config.hidden, 0.0), c(p.config.hidden, 0.0);
  steps.push_back(advance(ctx, p, mode, kImageInput, h, c));
  for (std::size_t tok : tokens) {
    const StepRecord& last = steps.back();
    steps.push_back(advance(ctx, p, mode, tok, last.cell.h, last.cell.c));
  }
  return steps;
}

struct EncoderState {
  Vec h;
  Vec c;
  AttentionTrace trace;
  AttentionMode mode = AttentionMode::learned;
  std::shared_ptr<const ImageContext> image;
};

inline EncoderState encode(const FeaturePack& pack, std::span<const std::size_t> question, const ModelParams& p,
                           AttentionMode mode) {
  EncoderState state;
  state.mode = mode;
  state.image = ImageContext::make(pack, p);
  auto steps = run_sequence(*state.image, p, mode, question);
  for (auto& st : steps) state.trace.steps.push_back(std::move(st.attention.weights));
  state.h = std::move(steps.back().cell.h);
  state.c = std::move(steps.back().cell.c);
  return state;
}

inline Vec output_logits(std::span<const double> h, const ModelParams& p) {
  Vec logits(p.b_s.values());
  gemv_acc(p.W_s, h, logits);
  return logits;
}

/// Sum of log-probabilities of the answer tokens and the closing END
/// token, continuing the recurrence from `state`.
inline double telling_answer_loglik(const EncoderState& state, std::span<const std::size_t> answer,
                                    const ModelParams& p, AttentionMode mode) {
  if (answer.empty()) throw DomainError("telling_answer_loglik: empty answer");
  Vec h = state.h, c = state.c;
  double total = 0.0;
  for (std::size_t k = 0; k <= answer.size(); ++k) {
    const std::size_t target = k < answer.size() ? answer[k] : kEndAnswerIndex;
    if (target >= p.config.vocab) throw IndexError("answer token " + std::to_string(target) + " outside vocabulary");
    const Vec logits = output_logits(h, p);
    total += logits[target] - log_sum_exp(logits);
    if (k < answer.size()) {
      StepRecord st = advance(*state.image, p, mode, answer[k], h, c);
      h = std::move(st.cell.h);
      c = std::move(st.cell.c);
    }
  }
  return total;
}

inline Vec region_projection(std::span<const double> region_feature, const ModelParams& p) {
  if (region_feature.size() != p.config.feature_dim) {
    throw DimensionError("region feature has " + std::to_string(region_feature.size()) + " entries, model expects " +
                         std::to_string(p.config.feature_dim));
  }
  Vec proj(p.b_p.values());
  gemv_acc(p.W_p, region_feature, proj);
  return proj;
}

inline double pointing_candidate_score(const EncoderState& state, const Tensor& region_feature, const ModelParams& p) {
  return dot(region_projection(region_feature.data(), p), state.h);
}

struct McPrediction {
  std::size_t index = 0;
  std::array<double, kNumCandidates> scores{};
};

/// Index of the largest score, lowest index on ties.
inline std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

inline std::vector<std::size_t> question_indices(const QARecord& rec, const Vocabulary& vocab) {
  return vocab.encode(tokenize_question(rec.question));
}

inline McPrediction predict_mc(const QARecord& rec, const FeaturePack& pack, const ModelParams& p,
                               const Vocabulary& vocab, AttentionMode mode) {
  const auto question = question_indices(rec, vocab);
  const EncoderState state = encode(pack, question, p, mode);
  McPrediction out;
  const auto candidates = rec.candidates();
  for (std::size_t i = 0; i < kNumCandidates; ++i) {
    if (rec.kind == QAKind::telling) {
      const auto answer = vocab.encode(tokenize(candidates[i]));
      if (answer.empty()) throw DomainError("qa_id " + rec.qa_id + ": candidate " + std::to_string(i) + " has no tokens");
      out.scores[i] = telling_answer_loglik(state, answer, p, mode);
    } else {
      out.scores[i] = pointing_candidate_score(state, pack.region(candidates[i]), p);
    }
  }
  out.index = argmax_first(out.scores);
  return out;
}

}  // namespace v7w::qamodel
