#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gen.hpp"
#include "v7w/qamodel/gradcheck_fixture.hpp"
#include "v7w/qamodel/params.hpp"
#include "v7w/qamodel/train.hpp"

using namespace v7w;
using namespace v7w::qamodel;

namespace {

ModelConfig tiny(std::size_t hidden, std::size_t channels, std::size_t cells, std::size_t vocab = 6) {
  ModelConfig c;
  c.feature_dim = 3;
  c.cells = cells;
  c.channels = channels;
  c.embed = 2;
  c.hidden = hidden;
  c.att_dim = 1;
  c.vocab = vocab;
  return c;
}

FeaturePack micro_pack(const ModelConfig& cfg, std::uint64_t seed, std::vector<std::string> regions = {}) {
  return synth_feature_pack("img-" + std::to_string(seed), seed, std::nullopt, regions, cfg.feature_dims());
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

QARecord telling_record(std::string id, std::string q, std::string a, std::array<std::string, 3> d, std::size_t pos) {
  QARecord r;
  r.qa_id = std::move(id);
  r.image_id = "img";
  r.question = std::move(q);
  r.answer = std::move(a);
  r.distractors = std::move(d);
  r.answer_position = pos;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// init

TEST(Init, DeterministicBySeed) {
  const auto cfg = ModelConfig::micro(12);
  EXPECT_EQ(init_params(cfg, 3), init_params(cfg, 3));
  EXPECT_NE(init_params(cfg, 3), init_params(cfg, 4));
}

TEST(Init, BiasesZeroWeightsBounded) {
  const auto p = init_params(ModelConfig::micro(12), 5);
  p.for_each_tagged([](std::string_view name, const Tensor& t, bool is_bias) {
    const double s = 1.0 / std::sqrt(static_cast<double>(t.shape().back()));
    for (double v : t.data()) {
      if (is_bias) {
        EXPECT_EQ(v, 0.0) << name;
      } else {
        EXPECT_LE(std::abs(v), s) << name;
      }
    }
  });
}

TEST(Init, UniformSpreadMatchesFanIn) {
  ModelConfig cfg = ModelConfig::micro(4);
  cfg.feature_dim = 1024;
  cfg.embed = 64;
  const auto p = init_params(cfg, 6);
  const double s = 1.0 / std::sqrt(1024.0);
  double sum = 0.0, sq = 0.0;
  for (double v : p.W_img.data()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(p.W_img.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.01 * s);
  EXPECT_NEAR(sd, s / std::sqrt(3.0), 0.01 * s);
}

TEST(Init, ZeroWidthIsValidationError) {
  ModelConfig cfg = ModelConfig::micro(4);
  cfg.hidden = 0;
  EXPECT_THROW(init_params(cfg, 1), ValidationError);
  EXPECT_THROW(init_params(ModelConfig::micro(1), 1), ValidationError);
}

// ---------------------------------------------------------------------------
// attention

TEST(Attention, HandComputedFourCellsTwoChannels) {
  const auto cfg = tiny(1, 2, 4);
  ModelParams p = ModelParams::zeros(cfg);
  p.W_he(0, 0) = 1.0;
  p.W_ce(0, 0) = 1.0;
  p.W_ce(0, 1) = -0.5;
  p.w_a[0] = 2.0;
  Tensor conv({4, 2}, {1.0, 0.0, 0.0, 1.0, -1.0, 2.0, 0.5, 0.5});
  const std::vector<double> h = {0.3};
  const auto out = attention_step(h, conv, p, AttentionMode::learned);

  // e_j = 2 * tanh(0.3 + C_j0 - 0.5 C_j1)
  const double e[4] = {2 * std::tanh(1.3), 2 * std::tanh(-0.2), 2 * std::tanh(-1.7), 2 * std::tanh(0.55)};
  double z = 0.0;
  for (double x : e) z += std::exp(x);
  double r0 = 0.0, r1 = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double a = std::exp(e[j]) / z;
    EXPECT_NEAR(out.weights[j], a, 1e-15) << j;
    r0 += a * conv(j, 0);
    r1 += a * conv(j, 1);
  }
  EXPECT_NEAR(out.context[0], r0, 1e-15);
  EXPECT_NEAR(out.context[1], r1, 1e-15);
}

TEST(Attention, ZeroScoreVectorGivesUniformWeights) {
  const auto cfg = tiny(3, 2, 4);
  gen::Gen g(40);
  ModelParams p = ModelParams::zeros(cfg);
  p.W_he = g.tensor({1, 3});
  p.W_ce = g.tensor({1, 2});
  const Tensor conv = g.tensor({4, 2});
  const auto learned = attention_step(g.vec(3, -1, 1), conv, p, AttentionMode::learned);
  const auto uniform = attention_step(g.vec(3, -1, 1), conv, p, AttentionMode::uniform);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(learned.weights[j], 0.25, 1e-15);
    EXPECT_EQ(uniform.weights[j], 0.25);
  }
  for (int c = 0; c < 2; ++c) {
    const double mean = (conv(0, c) + conv(1, c) + conv(2, c) + conv(3, c)) / 4.0;
    EXPECT_NEAR(learned.context[c], mean, 1e-15);
    EXPECT_NEAR(uniform.context[c], mean, 1e-15);
  }
}

TEST(AttentionProperty, WeightsFormADistribution) {
  gen::Gen g(41);
  const auto cfg = ModelConfig::micro(5);
  for (int trial = 0; trial < 100; ++trial) {
    ModelParams p = init_params(cfg, trial);
    for (double& v : p.w_a.data()) v *= 10.0;
    const auto out = attention_step(g.vec(cfg.hidden, -3, 3), g.tensor({cfg.cells, cfg.channels}, -5, 5), p,
                                    AttentionMode::learned);
    double s = 0.0;
    for (double a : out.weights) {
      EXPECT_GE(a, 0.0);
      s += a;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Attention, WrongChannelCountIsDimensionError) {
  const auto p = ModelParams::zeros(tiny(1, 2, 4));
  EXPECT_THROW(attention_step(std::vector<double>{0.0}, Tensor({4, 3}), p, AttentionMode::learned), DimensionError);
}

// ---------------------------------------------------------------------------
// lstm cell

TEST(LstmCell, ZeroParametersHalveMemory) {
  const auto cfg = tiny(2, 1, 4);
  const auto p = ModelParams::zeros(cfg);
  const std::vector<double> v = {1.0, -1.0}, h = {0.2, 0.4}, c = {0.8, -0.6}, r = {3.0};
  const auto out = lstm_step(v, h, c, r, p);
  // i = f = o = 1/2, g = 0
  EXPECT_NEAR(out.c[0], 0.4, 1e-15);
  EXPECT_NEAR(out.c[1], -0.3, 1e-15);
  EXPECT_NEAR(out.h[0], 0.5 * std::tanh(0.4), 1e-15);
  EXPECT_NEAR(out.h[1], 0.5 * std::tanh(-0.3), 1e-15);
}

TEST(LstmCell, SaturatedGatesPassMemoryThrough) {
  const auto cfg = tiny(2, 1, 4);
  ModelParams p = ModelParams::zeros(cfg);
  p.b_gate[kForget].fill(50.0);
  p.b_gate[kInput].fill(-50.0);
  p.b_gate[kOutput].fill(50.0);
  const std::vector<double> c = {0.7, -0.2};
  const auto out = lstm_step(std::vector<double>{5.0, 5.0}, std::vector<double>{1.0, 1.0}, c, std::vector<double>{1.0}, p);
  EXPECT_NEAR(out.c[0], 0.7, 1e-12);
  EXPECT_NEAR(out.c[1], -0.2, 1e-12);
  EXPECT_NEAR(out.h[0], std::tanh(0.7), 1e-12);
}

TEST(LstmCell, TwoUnitHandOracle) {
  const auto cfg = tiny(2, 1, 4);
  ModelParams p = ModelParams::zeros(cfg);
  // Each gate sees v0 with a different weight, h1 and r0; no biases except g.
  const double wv[4] = {0.5, -1.0, 2.0, 1.5};
  for (std::size_t g = 0; g < 4; ++g) {
    p.W_v[g](0, 0) = wv[g];
    p.W_v[g](1, 0) = -wv[g];
    p.W_h[g](0, 1) = 0.25;
    p.W_r[g](1, 0) = 0.1 * static_cast<double>(g + 1);
  }
  p.b_gate[kCandidate][1] = 0.3;
  const std::vector<double> v = {0.4, 0.0}, h = {0.0, -0.8}, c = {1.0, 0.5}, r = {2.0};
  const auto out = lstm_step(v, h, c, r, p);

  // unit 0: pre_g = wv[g]*0.4 + 0.25*(-0.8)
  // unit 1: pre_g = -wv[g]*0.4 + 0.1(g+1)*2 (+0.3 for g)
  double pre0[4], pre1[4];
  for (int g = 0; g < 4; ++g) {
    pre0[g] = wv[g] * 0.4 - 0.2;
    pre1[g] = -wv[g] * 0.4 + 0.2 * (g + 1) + (g == 3 ? 0.3 : 0.0);
  }
  const double c0 = sigm(pre0[1]) * 1.0 + sigm(pre0[0]) * std::tanh(pre0[3]);
  const double c1 = sigm(pre1[1]) * 0.5 + sigm(pre1[0]) * std::tanh(pre1[3]);
  EXPECT_NEAR(out.c[0], c0, 1e-15);
  EXPECT_NEAR(out.c[1], c1, 1e-15);
  EXPECT_NEAR(out.h[0], sigm(pre0[2]) * std::tanh(c0), 1e-15);
  EXPECT_NEAR(out.h[1], sigm(pre1[2]) * std::tanh(c1), 1e-15);
}

TEST(LstmCell, WrongInputLengthIsDimensionError) {
  const auto p = ModelParams::zeros(tiny(2, 1, 4));
  EXPECT_THROW(lstm_step(std::vector<double>{1.0}, std::vector<double>{0, 0}, std::vector<double>{0, 0},
                         std::vector<double>{0}, p),
               DimensionError);
}

// ---------------------------------------------------------------------------
// encoder and heads

TEST(Encode, ZeroParamsGiveZeroState) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = ModelParams::zeros(cfg);
  const auto pack = micro_pack(cfg, 1);
  const std::vector<std::size_t> q = {2, 3, 4};
  const auto st = encode(pack, q, p, AttentionMode::learned);
  for (double x : st.h) EXPECT_EQ(x, 0.0);
  for (double x : st.c) EXPECT_EQ(x, 0.0);
  ASSERT_EQ(st.trace.steps.size(), q.size() + 1);
  for (const auto& a : st.trace.steps) {
    ASSERT_EQ(a.size(), cfg.cells);
    for (double w : a) EXPECT_NEAR(w, 0.25, 1e-15);
  }
}

TEST(Encode, FirstStepMatchesManualImageStep) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = init_params(cfg, 2);
  const auto pack = micro_pack(cfg, 2);
  const auto st = encode(pack, std::vector<std::size_t>{}, p, AttentionMode::learned);
  std::vector<double> v(p.b_img.values());
  for (std::size_t r = 0; r < cfg.embed; ++r)
    for (std::size_t c = 0; c < cfg.feature_dim; ++c) v[r] += p.W_img(r, c) * pack.global_feature[c];
  const std::vector<double> zero(cfg.hidden, 0.0);
  const auto att = attention_step(zero, pack.conv_map, p, AttentionMode::learned);
  const auto cell = lstm_step(v, zero, zero, att.context, p);
  for (std::size_t k = 0; k < cfg.hidden; ++k) EXPECT_NEAR(st.h[k], cell.h[k], 1e-14);
}

TEST(Encode, TokenOutsideVocabularyIsIndexError) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = init_params(cfg, 2);
  EXPECT_THROW(encode(micro_pack(cfg, 3), std::vector<std::size_t>{6}, p, AttentionMode::learned), IndexError);
}

TEST(TellingHead, ZeroParamsGiveUniformTokens) {
  const std::size_t V = 7;
  const auto cfg = ModelConfig::micro(V);
  const auto p = ModelParams::zeros(cfg);
  const auto st = encode(micro_pack(cfg, 4), std::vector<std::size_t>{2, 3}, p, AttentionMode::learned);
  for (std::size_t n : {1u, 2u, 5u}) {
    std::vector<std::size_t> ans(n, 4);
    EXPECT_NEAR(telling_answer_loglik(st, ans, p, AttentionMode::learned), -(double(n) + 1) * std::log(double(V)), 1e-12);
  }
}

TEST(TellingHead, BiasOnlySoftmaxChain) {
  const auto cfg = ModelConfig::micro(4);
  ModelParams p = ModelParams::zeros(cfg);
  p.b_s = Tensor::vector({0.5, 1.0, -1.0, 2.0});
  const auto st = encode(micro_pack(cfg, 5), std::vector<std::size_t>{2}, p, AttentionMode::learned);
  const double lse = std::log(std::exp(0.5) + std::exp(1.0) + std::exp(-1.0) + std::exp(2.0));
  // tokens 3, 2 then END (index 1)
  const double expect = (2.0 - lse) + (-1.0 - lse) + (1.0 - lse);
  EXPECT_NEAR(telling_answer_loglik(st, std::vector<std::size_t>{3, 2}, p, AttentionMode::learned), expect, 1e-13);
}

TEST(PointingHead, ScoreIsProjectionDotHidden) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = init_params(cfg, 7);
  const auto pack = micro_pack(cfg, 7, {"a"});
  const auto st = encode(pack, std::vector<std::size_t>{2, 3}, p, AttentionMode::learned);
  double expect = 0.0;
  for (std::size_t k = 0; k < cfg.hidden; ++k) {
    double proj = p.b_p[k];
    for (std::size_t c = 0; c < cfg.feature_dim; ++c) proj += p.W_p(k, c) * pack.region("a")[c];
    expect += proj * st.h[k];
  }
  EXPECT_NEAR(pointing_candidate_score(st, pack.region("a"), p), expect, 1e-14);
}

TEST(PredictMc, TiesGoToFirstCandidate) {
  const auto cfg = ModelConfig::micro(8);
  const auto p = ModelParams::zeros(cfg);
  Vocabulary vocab = Vocabulary::from_tokens({"<unk>", "<end>", "what", "?", "red", "blue", "green", "gray"});
  const auto rec = telling_record("t", "What?", "Red.", {"Blue.", "Green.", "Gray."}, 2);
  const auto pred = predict_mc(rec, micro_pack(cfg, 1), p, vocab, AttentionMode::learned);
  EXPECT_EQ(pred.index, 0u);
  EXPECT_EQ(pred.scores[0], pred.scores[3]);
}

TEST(PredictMcProperty, ChoiceFollowsCandidateUnderReordering) {
  const auto cfg = ModelConfig::micro(8);
  Vocabulary vocab = Vocabulary::from_tokens({"<unk>", "<end>", "what", "?", "red", "blue", "green", "gray"});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = init_params(cfg, seed);
    const auto pack = micro_pack(cfg, seed);
    std::string first_choice;
    for (std::size_t pos = 0; pos < 4; ++pos) {
      const auto rec = telling_record("t", "What?", "red", {"blue", "green", "gray"}, pos);
      const auto pred = predict_mc(rec, pack, p, vocab, AttentionMode::learned);
      const std::string chosen = rec.candidates()[pred.index];
      if (pos == 0) first_choice = chosen;
      EXPECT_EQ(chosen, first_choice) << "seed " << seed << " pos " << pos;
    }
  }
}

TEST(PredictMc, PointingUsesCandidateRegions) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = init_params(cfg, 8);
  const auto pack = micro_pack(cfg, 8, {"g0", "g1", "g2", "g3"});
  Vocabulary vocab = Vocabulary::from_tokens({"<unk>", "<end>", "which", "?"});
  ModelParams q = grow_vocabulary(p, 6);
  QARecord rec;
  rec.qa_id = "p";
  rec.kind = QAKind::pointing;
  rec.category = Category::which;
  rec.question = "Which?";
  rec.answer = "g2";
  rec.distractors = {"g0", "g1", "g3"};
  rec.answer_position = 2;
  const auto pred = predict_mc(rec, pack, q, vocab, AttentionMode::learned);
  const auto st = encode(pack, question_indices(rec, vocab), q, AttentionMode::learned);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(pred.scores[i], pointing_candidate_score(st, pack.region(rec.candidates()[i]), q));
  rec.distractors = {"g0", "g1", "missing"};
  EXPECT_THROW(predict_mc(rec, pack, q, vocab, AttentionMode::learned), IndexError);
}

// ---------------------------------------------------------------------------
// vocabulary growth

TEST(GrowVocabulary, TailTokensDoNotChangeScores) {
  const auto cfg = ModelConfig::micro(6);
  const auto p = init_params(cfg, 9);
  const auto grown = grow_vocabulary(p, 11);
  const auto pack = micro_pack(cfg, 9);
  const std::vector<std::size_t> q = {2, 3, 4}, a = {5, 2};
  const auto s1 = encode(pack, q, p, AttentionMode::learned);
  const auto s2 = encode(pack, q, grown, AttentionMode::learned);
  EXPECT_EQ(s1.h, s2.h);
  EXPECT_EQ(telling_answer_loglik(s1, a, p, AttentionMode::learned),
            telling_answer_loglik(s2, a, grown, AttentionMode::learned));
  EXPECT_THROW(grow_vocabulary(p, 5), DomainError);
}

// ---------------------------------------------------------------------------
// training

namespace {

struct Toy {
  ModelConfig cfg = ModelConfig::micro(8);
  std::vector<FeaturePack> packs;
  std::vector<Example> examples;

  Toy() {
    packs.reserve(4);
    for (std::size_t i = 0; i < 4; ++i) packs.push_back(micro_pack(cfg, 10 + i, {"r0", "r1", "r2", "r3"}));
    for (std::size_t i = 0; i < 4; ++i) {
      Example t;
      t.qa_id = "t" + std::to_string(i);
      t.pack = &packs[i];
      t.question = {2, 3, 7};
      t.answer = {4 + i};
      examples.push_back(t);
      Example q;
      q.qa_id = "p" + std::to_string(i);
      q.kind = QAKind::pointing;
      q.pack = &packs[i];
      q.question = {5, 7};
      for (std::size_t r = 0; r < 4; ++r) q.regions[r] = &packs[i].region("r" + std::to_string(r));
      q.target = i;
      examples.push_back(q);
    }
  }
};

}  // namespace

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  Toy toy;
  ModelParams p = init_params(toy.cfg, 1);
  const ModelParams before = p;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 3;
  tc.adam.learning_rate = 0.0;
  const auto res = train(toy.examples, p, tc);
  EXPECT_EQ(p, before);
  EXPECT_EQ(res.epoch_loss.size(), 3u);
  EXPECT_EQ(res.steps, 9u);
  EXPECT_NEAR(res.epoch_loss[0], res.epoch_loss[2], 1e-12);
}

TEST(Train, LossFallsOnToyProblem) {
  Toy toy;
  ModelParams p = init_params(toy.cfg, 2);
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 4;
  tc.adam.learning_rate = 0.02;
  const auto res = train(toy.examples, p, tc);
  EXPECT_LT(res.epoch_loss.back(), 0.5 * res.epoch_loss.front());
}

TEST(Train, DeterministicBySeedAndCallbackStops) {
  Toy toy;
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 3;
  tc.adam.learning_rate = 0.01;
  tc.seed = 4;
  ModelParams a = init_params(toy.cfg, 3), b = a;
  train(toy.examples, a, tc);
  train(toy.examples, b, tc);
  EXPECT_EQ(a, b);
  ModelParams c = init_params(toy.cfg, 3);
  std::size_t calls = 0;
  const auto res = train(toy.examples, c, tc, [&](std::size_t epoch, double) {
    ++calls;
    return epoch < 1;
  });
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(res.epoch_loss.size(), 2u);
}

TEST(Train, EmptyExamplesIsDomainError) {
  ModelParams p = init_params(ModelConfig::micro(4), 1);
  EXPECT_THROW(train(std::span<const Example>{}, p, TrainConfig{}), DomainError);
}

TEST(ExampleLoss, TellingIsMeanTokenCrossEntropy) {
  const std::size_t V = 5;
  const auto cfg = ModelConfig::micro(V);
  const auto p = ModelParams::zeros(cfg);
  const auto pack = micro_pack(cfg, 1);
  Example ex;
  ex.pack = &pack;
  ex.question = {2, 3};
  ex.answer = {4, 4, 4};
  EXPECT_NEAR(example_loss(ex, p, AttentionMode::learned), std::log(double(V)), 1e-12);
}

TEST(ExampleLoss, PointingIsFourWayCrossEntropy) {
  const auto cfg = ModelConfig::micro(5);
  const auto p = ModelParams::zeros(cfg);
  const auto pack = micro_pack(cfg, 1, {"a", "b", "c", "d"});
  Example ex;
  ex.kind = QAKind::pointing;
  ex.pack = &pack;
  ex.question = {2};
  ex.regions = {&pack.region("a"), &pack.region("b"), &pack.region("c"), &pack.region("d")};
  EXPECT_NEAR(example_loss(ex, p, AttentionMode::learned), std::log(4.0), 1e-12);
}

// ---------------------------------------------------------------------------
// gradients

TEST(Gradients, MicroModelMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const MicroCheck mc = make_micro_check(seed);
    for (auto mode : {AttentionMode::learned, AttentionMode::uniform}) {
      const auto rep = run_micro_gradcheck(mc, mode);
      EXPECT_LT(rep.telling.max_relative_error, 1e-4) << "seed " << seed << " " << rep.telling.worst_entry;
      EXPECT_LT(rep.pointing.max_relative_error, 1e-4) << "seed " << seed << " " << rep.pointing.worst_entry;
      EXPECT_LT(rep.combined.max_relative_error, 1e-4) << "seed " << seed << " " << rep.combined.worst_entry;
      EXPECT_EQ(rep.combined.entries_checked, mc.params.scalar_count());
    }
  }
}

TEST(Gradients, CopiedFixtureStillChecks) {
  MicroCheck mc = make_micro_check(4);
  const MicroCheck copy = mc;
  mc.pack = FeaturePack{};  // the original's pack goes away
  EXPECT_LT(run_micro_gradcheck(copy, AttentionMode::learned).max_relative_error(), 1e-4);
}

TEST(Gradients, CancellingBiasesHaveZeroGradient) {
  const MicroCheck mc = make_micro_check(5);
  ModelParams g = ModelParams::zeros(mc.config);
  const std::array<Example, 2> both = {bind_to_pack(mc.telling, mc), bind_to_pack(mc.pointing, mc)};
  batch_loss(both, mc.params, AttentionMode::learned, &g);
  EXPECT_NEAR(g.b_a[0], 0.0, 1e-14);  // sum of a_j (da_j - <a, da>), zero up to roundoff
  for (double v : g.b_p.data()) EXPECT_EQ(v, 0.0);
}

// ---------------------------------------------------------------------------
// checkpoints

TEST(Checkpoint, RoundTripIsExact) {
  const auto cfg = ModelConfig::micro(9);
  const auto p = init_params(cfg, 11);
  ModelParams back = decode_checkpoint(encode_checkpoint(p));
  back.config.cells = cfg.cells;
  EXPECT_EQ(back, p);
  const auto path = (std::filesystem::temp_directory_path() / "v7w_ckpt_test.v7wm").string();
  save_checkpoint(p, path);
  EXPECT_EQ(load_checkpoint(path, cfg.cells), p);
}

TEST(Checkpoint, CorruptInputsAreFormatErrors) {
  const std::string bytes = encode_checkpoint(init_params(ModelConfig::micro(5), 1));
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}
