#pragma once

#include <array>
#include <string>
#include <vector>

#include "v7w/numkit/gradcheck.hpp"
#include "v7w/qamodel/train.hpp"

namespace v7w::qamodel {

/// A micro model plus one telling and one pointing example, used to compare
/// analytic and finite-difference gradients.
///
/// The evaluation point is moved away from the initialization (weights
/// doubled, biases drawn from N(0, 0.5^2), features from N(0, 1)).  At the
/// raw initialization many gradient entries sit within a few ulps of zero,
/// where central differences at h = 1e-5 carry ~1e-11 of roundoff; the
/// relative-error floor of 1e-8 does not absorb that.
struct MicroCheck {
  ModelConfig config;
  ModelParams params;
  FeaturePack pack;
  Example telling;
  Example pointing;
};

inline constexpr std::size_t kMicroCheckVocab = 20;

inline MicroCheck make_micro_check(std::uint64_t seed) {
  MicroCheck mc;
  mc.config = ModelConfig::micro(kMicroCheckVocab);
  mc.params = init_params(mc.config, seed);
  Rng rng(mix_seed(seed, "micro-check"));
  mc.params.for_each_tagged([&](std::string_view, Tensor& t, bool is_bias) {
    for (double& x : t.data()) x = is_bias ? 0.5 * rng.normal() : 2.0 * x;
  });
  const FeatureDims dims = mc.config.feature_dims();
  mc.pack.image_id = "micro";
  mc.pack.global_feature = Tensor({dims.global});
  mc.pack.conv_map = Tensor({dims.cells, dims.channels});
  for (double& v : mc.pack.global_feature.data()) v = rng.normal();
  for (double& v : mc.pack.conv_map.data()) v = rng.normal();
  const std::array<std::string, kNumCandidates> ids = {"r0", "r1", "r2", "r3"};
  for (const auto& id : ids) {
    Tensor f({dims.global});
    for (double& v : f.data()) v = rng.normal();
    mc.pack.region_features.emplace(id, std::move(f));
  }
  auto token = [&] { return 2 + rng.below(kMicroCheckVocab - 2); };
  const std::size_t question_mark = token();

  mc.telling.qa_id = "micro-telling";
  mc.telling.kind = QAKind::telling;
  mc.telling.pack = &mc.pack;
  mc.telling.question = {token(), token(), token(), question_mark};
  mc.telling.answer = {token(), token()};

  mc.pointing.qa_id = "micro-pointing";
  mc.pointing.kind = QAKind::pointing;
  mc.pointing.pack = &mc.pack;
  mc.pointing.question = {token(), token(), question_mark};
  for (std::size_t i = 0; i < kNumCandidates; ++i) mc.pointing.regions[i] = &mc.pack.region(ids[i]);
  mc.pointing.target = rng.below(kNumCandidates);
  return mc;
}

struct MicroCheckReport {
  GradCheckResult telling;
  GradCheckResult pointing;
  GradCheckResult combined;  // mean loss over both examples

  double max_relative_error() const {
    return std::max({telling.max_relative_error, pointing.max_relative_error, combined.max_relative_error});
  }
};

inline GradCheckResult check_examples(std::span<const Example> batch, const ModelParams& params, AttentionMode mode,
                                      double h) {
  ModelParams grad = ModelParams::zeros(params.config);
  batch_loss(batch, params, mode, &grad);
  ModelParams probe = params;
  return finite_diff_grad_check([&](const ModelParams& q) { return batch_loss(batch, q, mode); }, probe, grad, h);
}

/// Points an example back at `mc.pack`; a copied or moved MicroCheck still
/// holds pointers into the original.
inline Example bind_to_pack(Example ex, const MicroCheck& mc) {
  ex.pack = &mc.pack;
  if (ex.kind == QAKind::pointing) {
    for (std::size_t i = 0; i < kNumCandidates; ++i) ex.regions[i] = &mc.pack.region("r" + std::to_string(i));
  }
  return ex;
}

inline MicroCheckReport run_micro_gradcheck(const MicroCheck& mc, AttentionMode mode, double h = 1e-5) {
  MicroCheckReport rep;
  const std::array<Example, 2> both = {bind_to_pack(mc.telling, mc), bind_to_pack(mc.pointing, mc)};
  rep.telling = check_examples(std::span(&both[0], 1), mc.params, mode, h);
  rep.pointing = check_examples(std::span(&both[1], 1), mc.params, mode, h);
  rep.combined = check_examples(both, mc.params, mode, h);
  return rep;
}

}  // namespace v7w::qamodel
