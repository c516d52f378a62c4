#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gen.hpp"
#include "v7w/evalkit/heatmap.hpp"
#include "v7w/evalkit/report.hpp"
#include "v7w/synth.hpp"

using namespace v7w;
using namespace v7w::evalkit;

namespace {

QARecord rec_of(std::string id, Category cat, std::size_t pos) {
  QARecord r;
  r.qa_id = std::move(id);
  r.category = cat;
  r.kind = cat == Category::which ? QAKind::pointing : QAKind::telling;
  r.answer_position = pos;
  return r;
}

HeatMap grid_of(std::size_t side, std::vector<double> values, int w = 100, int h = 100) {
  HeatMap hm;
  hm.grid = Tensor({side, side}, std::move(values));
  hm.width = w;
  hm.height = h;
  return hm;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// accuracy

TEST(Evaluate, GoldPredictorScoresOne) {
  const Corpus c = synth_corpus({70, 1, TaskFilter::both});
  const auto rep = evaluate(c.records, [](const QARecord& r) { return r.answer_position; }, "gold");
  EXPECT_EQ(rep.overall.accuracy(), 1.0);
  EXPECT_EQ(rep.overall.total, 70u);
  for (Category cat : kAllCategories) EXPECT_EQ(rep.accuracy(cat), 1.0);
  EXPECT_TRUE(rep.errors.empty());
}

TEST(Evaluate, UniformRandomPredictorNearChance) {
  const Corpus c = synth_corpus({1000, 2, TaskFilter::both});
  gen::Gen g(60);
  const auto rep = evaluate(c.records, [&](const QARecord&) { return g.index(4); });
  EXPECT_NEAR(rep.overall.accuracy(), 0.25, 0.05);
}

TEST(Evaluate, ScriptedPredictorHandCounts) {
  // what: 2/3, who: 1/1, which: 1/2 (one thrown), how: 0/2
  const std::vector<QARecord> recs = {rec_of("a", Category::what, 0), rec_of("b", Category::what, 1),
                                      rec_of("c", Category::what, 2), rec_of("d", Category::who, 3),
                                      rec_of("e", Category::which, 0), rec_of("f", Category::which, 1),
                                      rec_of("g", Category::how, 2), rec_of("h", Category::how, 3)};
  const std::map<std::string, std::size_t> script = {{"a", 0}, {"b", 1}, {"c", 0}, {"d", 3},
                                                     {"e", 0}, {"g", 1}, {"h", 0}};
  const auto rep = evaluate(recs, [&](const QARecord& r) {
    auto it = script.find(r.qa_id);
    if (it == script.end()) throw StorageError("no features for " + r.qa_id);
    return it->second;
  });
  EXPECT_NEAR(rep.accuracy(Category::what), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(rep.accuracy(Category::who), 1.0);
  EXPECT_EQ(rep.accuracy(Category::which), 0.5);
  EXPECT_EQ(rep.accuracy(Category::how), 0.0);
  EXPECT_EQ(rep.telling.correct, 3u);
  EXPECT_EQ(rep.telling.total, 6u);
  EXPECT_EQ(rep.pointing.correct, 1u);
  EXPECT_EQ(rep.overall.correct, 4u);
  EXPECT_EQ(rep.overall.total, 8u);
  ASSERT_EQ(rep.errors.size(), 1u);
  EXPECT_EQ(rep.errors[0].qa_id, "f");
  EXPECT_FALSE(rep.outcomes[5].chosen.has_value());
}

TEST(Evaluate, OutOfRangeChoiceIsRecordedError) {
  const std::vector<QARecord> recs = {rec_of("a", Category::what, 0)};
  const auto rep = evaluate(recs, [](const QARecord&) { return std::size_t{4}; });
  EXPECT_EQ(rep.overall.correct, 0u);
  ASSERT_EQ(rep.errors.size(), 1u);
}

TEST(Evaluate, EmptyInputGivesZeroTotals) {
  const auto rep = evaluate({}, [](const QARecord&) { return std::size_t{0}; });
  EXPECT_EQ(rep.overall.total, 0u);
  EXPECT_EQ(rep.overall.accuracy(), 0.0);
}

TEST(ReportJson, ColumnsRowsAndCounts) {
  const std::vector<QARecord> recs = {rec_of("a", Category::what, 0), rec_of("b", Category::which, 1)};
  const auto rep = evaluate(recs, [](const QARecord&) { return std::size_t{0}; }, "always-first");
  const auto doc = to_json(rep);
  ASSERT_EQ(doc["columns"].size(), 11u);
  EXPECT_EQ(doc["columns"][0], "method");
  EXPECT_EQ(doc["columns"][7], "which");
  EXPECT_EQ(doc["columns"][10], "overall");
  const auto& row = doc["rows"][0];
  EXPECT_EQ(row["method"], "always-first");
  EXPECT_EQ(row["what"], 1.0);
  EXPECT_EQ(row["which"], 0.0);
  EXPECT_TRUE(row["why"].is_null());
  EXPECT_EQ(row["overall"], 0.5);
  EXPECT_EQ(doc["counts"]["always-first"]["overall"]["total"], 2);
}

TEST(MajorityVote, PluralityAndTies) {
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{2, 2, 1, 0, 2}), 2u);
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{3, 1, 3, 1, 0}), 1u);
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{0, 1, 2, 3, 3}), 3u);
  EXPECT_THROW(majority_vote(std::vector<std::size_t>{0, 1, 2, 3}), DomainError);
  EXPECT_THROW(majority_vote(std::vector<std::size_t>{0, 1, 2, 3, 4}), DomainError);
}

TEST(MajorityVoteProperty, WinnerHasMaximalVotes) {
  gen::Gen g(61);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> r(5);
    for (auto& x : r) x = g.index(4);
    const std::size_t w = majority_vote(r);
    std::array<int, 4> votes{};
    for (auto x : r) ++votes[x];
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_LE(votes[i], votes[w]);
      if (i < w) {
        ASSERT_LT(votes[i], votes[w]);
      }
    }
  }
}

TEST(FrequencyBinAccuracy, HandBinned) {
  auto pointing = [](std::string id, std::string object) {
    QARecord r = rec_of(id, Category::which, 0);
    r.answer = id + "-g";
    r.groundings.push_back({id + "-g", object, {0, 0, 1, 1}});
    return r;
  };
  const std::vector<QARecord> recs = {pointing("a", "cat"), pointing("b", "cat"), pointing("c", "dog"),
                                      pointing("d", "yak"), rec_of("t", Category::what, 0)};
  std::vector<Outcome> outs = {{"a", 0, true}, {"b", 1, false}, {"c", 0, true}, {"d", 2, false}, {"t", 0, true}};
  const std::map<std::size_t, std::set<std::string>> bins = {{4, {"cat"}}, {8, {"dog"}}, {16, {"owl"}}};
  const auto acc = accuracy_by_frequency_bin(recs, outs, bins);
  const std::map<std::size_t, double> expect = {{4, 0.5}, {8, 1.0}};
  EXPECT_EQ(acc, expect);
}

// ---------------------------------------------------------------------------
// heatmaps

TEST(HeatMap, MaxOverStepsAndPeak) {
  const std::vector<std::vector<double>> steps = {{0.1, 0.2, 0.3, 0.4}, {0.5, 0.1, 0.2, 0.2}, {0.0, 0.0, 0.0, 1.0}};
  const auto hm = attention_heatmap(steps, 448, 448);
  EXPECT_EQ(hm.side(), 2u);
  EXPECT_EQ(hm.grid.values(), (std::vector<double>{0.5, 0.2, 0.3, 1.0}));
  EXPECT_EQ(peak_cell(hm), 3u);
  EXPECT_EQ(cell_center(hm, 3), (std::pair<double, double>{336.0, 336.0}));
  EXPECT_EQ(cell_center(hm, 1), (std::pair<double, double>{336.0, 112.0}));
}

TEST(HeatMap, InvalidTraces) {
  EXPECT_THROW(attention_heatmap(std::vector<std::vector<double>>{}), DomainError);
  EXPECT_THROW(attention_heatmap(std::vector<std::vector<double>>{{0.5, 0.5, 0.0}}), DimensionError);
  EXPECT_THROW(attention_heatmap(std::vector<std::vector<double>>{{1, 0, 0, 0}, {1}}), DimensionError);
}

TEST(HeatMap, PeakTieGoesToLowestCell) {
  EXPECT_EQ(peak_cell(grid_of(2, {0.1, 0.4, 0.4, 0.1})), 1u);
}

TEST(PeakInBox, ThreeOfFiveHits) {
  // 2x2 grid on a 100x100 image: cell centers at 25 and 75.
  std::vector<HeatMap> maps = {grid_of(2, {1, 0, 0, 0}), grid_of(2, {0, 1, 0, 0}), grid_of(2, {0, 0, 1, 0}),
                               grid_of(2, {0, 0, 0, 1}), grid_of(2, {1, 0, 0, 0})};
  std::vector<std::vector<BoundingBox>> boxes = {{{0, 0, 50, 50}},      // hit
                                                 {{50, 0, 50, 50}},     // hit
                                                 {{50, 50, 50, 50}},    // miss
                                                 {{70, 70, 10, 10}},    // hit
                                                 {{26, 26, 10, 10}}};   // miss
  const auto rep = peak_in_box_rate(maps, boxes);
  EXPECT_EQ(rep.hits, 3u);
  EXPECT_EQ(rep.total, 5u);
  EXPECT_DOUBLE_EQ(rep.rate, 0.6);
  EXPECT_NEAR(rep.mean_box_area_fraction, (0.25 * 3 + 0.01 * 2) / 5.0, 1e-15);
}

TEST(PeakInBoxProperty, AddingBoxesNeverLowersRate) {
  gen::Gen g(62);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + g.index(8);
    std::vector<HeatMap> maps;
    std::vector<std::vector<BoundingBox>> boxes;
    for (std::size_t i = 0; i < n; ++i) {
      maps.push_back(grid_of(3, g.vec(9, 0, 1), 90, 60));
      boxes.push_back({g.box(90, 60)});
    }
    const double before = peak_in_box_rate(maps, boxes).rate;
    for (auto& b : boxes) b.push_back(g.box(90, 60));
    ASSERT_GE(peak_in_box_rate(maps, boxes).rate, before);
  }
}

TEST(AnswerBoxes, SpecificAndMentionedVariants) {
  QARecord r = rec_of("p", Category::which, 0);
  r.question = "Which dog is asleep?";
  r.answer = "g1";
  r.groundings = {{"g1", "dog", {0, 0, 10, 10}}, {"g2", "dog", {20, 0, 10, 10}}, {"g3", "cat", {40, 0, 10, 10}}};
  const auto specific = answer_boxes(r, BoxVariant::specific);
  ASSERT_EQ(specific.size(), 1u);
  EXPECT_EQ(specific[0], (BoundingBox{0, 0, 10, 10}));
  EXPECT_EQ(answer_boxes(r, BoxVariant::any_mentioned).size(), 2u);

  QARecord t = rec_of("t", Category::what, 0);
  t.question = "What is near the window?";
  t.answer = "A cat.";
  t.groundings = r.groundings;
  const auto ts = answer_boxes(t, BoxVariant::specific);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0], (BoundingBox{40, 0, 10, 10}));
}

// ---------------------------------------------------------------------------
// graymap export

TEST(HeatmapImage, ConstantGridIsBlack) {
  const auto img = heatmap_image(grid_of(3, std::vector<double>(9, 0.7)), false);
  EXPECT_EQ(img.pixels, std::vector<std::uint8_t>(9, 0));
}

TEST(HeatmapImage, HotCellIsWhiteRestBlack) {
  std::vector<double> v(9, 0.1);
  v[5] = 0.9;
  const auto img = heatmap_image(grid_of(3, v), false);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(img.pixels[i], i == 5 ? 255 : 0) << i;
}

TEST(HeatmapImage, BinomialBlurOfCenteredSpike) {
  std::vector<double> v(25, 0.0);
  v[12] = 1.0;
  const auto img = heatmap_image(grid_of(5, v), true);
  // weights 4/16, 2/16, 1/16 around the spike, normalized by 4/16
  EXPECT_EQ(img.pixels[12], 255);
  EXPECT_EQ(img.pixels[7], 128);
  EXPECT_EQ(img.pixels[11], 128);
  EXPECT_EQ(img.pixels[6], 64);
  EXPECT_EQ(img.pixels[18], 64);
  EXPECT_EQ(img.pixels[0], 0);
}

TEST(HeatmapImage, UpsampleRepeatsCells) {
  const auto img = heatmap_image(grid_of(2, {0, 1, 0, 0}), false, 3);
  EXPECT_EQ(img.width, 6u);
  EXPECT_EQ(img.height, 6u);
  EXPECT_EQ(img.pixels[0 * 6 + 3], 255);
  EXPECT_EQ(img.pixels[2 * 6 + 5], 255);
  EXPECT_EQ(img.pixels[3 * 6 + 3], 0);
  EXPECT_THROW(heatmap_image(grid_of(2, {0, 1, 0, 0}), false, 0), DomainError);
}

TEST(Pgm, HeaderCommentsAndPayload) {
  const auto path = (std::filesystem::temp_directory_path() / "v7w_heatmap_test.pgm").string();
  export_heatmap_image(grid_of(2, {0, 1, 0.5, 0}), path, false, 1, {"seed=3", "qa_id=x"});
  const std::string bytes = slurp(path);
  const std::string header = "P5\n# seed=3\n# qa_id=x\n2 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 2]), 128);
}
